//! Synthetic eye-frame generator with exact ground truth.
//!
//! Scenes are rasterized without anti-aliasing: a sclera field, an iris
//! disk, the pupil ellipse, an eyelid half-plane covering a stated fraction
//! of the boundary, glint disks, then seeded Gaussian noise. The returned
//! ground truth is the pupil ellipse exactly as specified, so every
//! downstream metric has a closed-form reference.

use crate::ellipse::{EllipseParams, EllipseRecord};
use crate::imaging::GrayImage;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SpecError {
    #[error("pupil ellipse not contained in the iris disk")]
    PupilOutsideIris,
    #[error("occlusion fraction must be in [0, 1], got {0}")]
    BadOcclusion(f64),
    #[error("intensities must be ordered pupil < iris < sclera")]
    BadIntensities,
    #[error("noise sigma must be non-negative, got {0}")]
    BadNoise(f64),
}

/// Where glint disks may land relative to the pupil boundary.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum GlintPlacement {
    /// Inside the iris but clear of the pupil rim.
    #[default]
    AvoidRim,
    /// Centered on the pupil boundary, breaking the rim chain.
    OnRim,
    /// On the pupil boundary at a fixed parameter in [0, 1); each further
    /// glint advances by a fifth of the boundary.
    OnRimAt(f64),
    /// Uniform over the iris disk.
    Anywhere,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlintSpec {
    pub count: u32,
    pub radius: f64,
    pub intensity: u8,
    pub placement: GlintPlacement,
}

impl Default for GlintSpec {
    fn default() -> Self {
        Self { count: 0, radius: 4.0, intensity: 250, placement: GlintPlacement::AvoidRim }
    }
}

/// Full description of one synthetic frame. `pupil: None` renders a blink
/// frame; `occlusion` then applies to the iris boundary instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub width: u32,
    pub height: u32,
    pub pupil: Option<EllipseRecord>,
    pub iris_cx: f64,
    pub iris_cy: f64,
    pub iris_radius: f64,
    pub pupil_intensity: u8,
    pub iris_intensity: u8,
    pub sclera_intensity: u8,
    pub occlusion: f64,
    pub glints: GlintSpec,
    /// Dark eyelash strokes hanging from the lid line (requires
    /// `occlusion > 0`). They add the edge clutter half-closed eyes carry.
    pub lashes: u32,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            width: 1280,
            height: 720,
            pupil: Some(EllipseRecord { cx: 640.0, cy: 360.0, a: 50.0, b: 45.0, theta_deg: 0.0 }),
            iris_cx: 640.0,
            iris_cy: 360.0,
            iris_radius: 150.0,
            // IR eye frames: the pupil sits far below the iris, while iris
            // and sclera are comparatively close. The pupil has to be the
            // strongest dark compact blob for the multi-scale ROI argmax.
            pupil_intensity: 20,
            iris_intensity: 130,
            sclera_intensity: 190,
            occlusion: 0.0,
            glints: GlintSpec::default(),
            lashes: 0,
            noise_sigma: 0.0,
            seed: 1,
        }
    }
}

fn validate(spec: &SceneSpec) -> Result<Option<EllipseParams>, SpecError> {
    if !(0.0..=1.0).contains(&spec.occlusion) {
        return Err(SpecError::BadOcclusion(spec.occlusion));
    }
    if spec.pupil_intensity >= spec.iris_intensity || spec.iris_intensity >= spec.sclera_intensity
    {
        return Err(SpecError::BadIntensities);
    }
    if spec.noise_sigma < 0.0 || !spec.noise_sigma.is_finite() {
        return Err(SpecError::BadNoise(spec.noise_sigma));
    }
    let gt = spec.pupil.as_ref().map(EllipseParams::from);
    if let Some(e) = &gt {
        let center_dist = (e.cx - spec.iris_cx).hypot(e.cy - spec.iris_cy);
        if center_dist + e.a > spec.iris_radius {
            return Err(SpecError::PupilOutsideIris);
        }
    }
    Ok(gt)
}

/// Boundary samples with arc-length weights, used to place the eyelid so
/// that it covers the requested fraction of the boundary.
fn boundary_samples(e: &EllipseParams, n: usize) -> Vec<(f64, f64)> {
    (0..n)
        .map(|k| {
            let t = k as f64 * std::f64::consts::TAU / n as f64;
            let p = e.point_at(t);
            let (s, c) = t.sin_cos();
            let w = (e.a * s).hypot(e.b * c);
            (p[1], w)
        })
        .collect()
}

/// Eyelid line (the half-plane is y <= y_lid) such that `fraction` of the
/// boundary arc length lies on or above the line. Monotone in y_lid, so a
/// plain bisection converges.
fn eyelid_line(e: &EllipseParams, fraction: f64) -> f64 {
    if fraction <= 0.0 {
        return f64::NEG_INFINITY;
    }
    let samples = boundary_samples(e, 4096);
    let total: f64 = samples.iter().map(|&(_, w)| w).sum();
    if fraction >= 1.0 {
        return samples.iter().map(|&(y, _)| y).fold(f64::MIN, f64::max) + 2.0;
    }
    let covered = |y_lid: f64| -> f64 {
        samples.iter().filter(|&&(y, _)| y <= y_lid).map(|&(_, w)| w).sum::<f64>() / total
    };
    let mut lo = e.cy - e.a - 1.0;
    let mut hi = e.cy + e.a + 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if covered(mid) < fraction {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Rasterize the scene. Returns the image and the ground-truth pupil
/// ellipse (absent for blink frames).
pub fn render(spec: &SceneSpec) -> Result<(GrayImage, Option<EllipseParams>), SpecError> {
    let gt = validate(spec)?;
    let mut img = GrayImage::new(spec.width, spec.height, spec.sclera_intensity);

    // Iris disk.
    let (icx, icy, ir) = (spec.iris_cx, spec.iris_cy, spec.iris_radius);
    let x0 = ((icx - ir).floor().max(0.0)) as u32;
    let x1 = (((icx + ir).ceil() as i64 + 1).clamp(0, spec.width as i64)) as u32;
    let y0 = ((icy - ir).floor().max(0.0)) as u32;
    let y1 = (((icy + ir).ceil() as i64 + 1).clamp(0, spec.height as i64)) as u32;
    for y in y0..y1 {
        for x in x0..x1 {
            if (x as f64 - icx).hypot(y as f64 - icy) <= ir {
                img.set(x, y, spec.iris_intensity);
            }
        }
    }

    // Pupil ellipse.
    if let Some(e) = &gt {
        let px0 = ((e.cx - e.a).floor().max(0.0)) as u32;
        let px1 = (((e.cx + e.a).ceil() as i64 + 1).clamp(0, spec.width as i64)) as u32;
        let py0 = ((e.cy - e.a).floor().max(0.0)) as u32;
        let py1 = (((e.cy + e.a).ceil() as i64 + 1).clamp(0, spec.height as i64)) as u32;
        for y in py0..py1 {
            for x in px0..px1 {
                if e.contains(x as f64, y as f64) {
                    img.set(x, y, spec.pupil_intensity);
                }
            }
        }
    }

    // Eyelid half-plane from the top. Skin renders at sclera intensity.
    let y_lid = if spec.occlusion > 0.0 {
        let target = gt.unwrap_or(EllipseParams::new(icx, icy, ir, ir, 0.0));
        let y_lid = eyelid_line(&target, spec.occlusion);
        let rows = (y_lid.floor() as i64 + 1).clamp(0, spec.height as i64) as u32;
        for y in 0..rows {
            if y as f64 > y_lid {
                continue;
            }
            for x in 0..spec.width {
                img.set(x, y, spec.sclera_intensity);
            }
        }
        Some(y_lid)
    } else {
        None
    };

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);

    // Eyelashes: dark strokes descending from the lid, bending sideways.
    // They never cross the pupil interior; lash tips rarely reach that far
    // on a real eye, and the rim must stay attributable to ground truth.
    if spec.lashes > 0 {
        if let Some(y0) = y_lid {
            for _ in 0..spec.lashes {
                let x0 = rng.gen_range(icx - 1.15 * ir..icx + 1.15 * ir);
                let slant: f64 = rng.gen_range(-0.7..0.7);
                let bend: f64 = rng.gen_range(-12.0..12.0);
                let len: f64 = rng.gen_range(35.0..80.0);
                let shade = rng.gen_range(40..75) as u8;
                // Hair is not a smooth curve; the wiggle keeps lash contours
                // from fitting ellipses the way true arcs do.
                let wiggle_phase: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
                let wiggle_freq: f64 = rng.gen_range(0.35..0.7);
                let steps = (len * 2.0) as u32;
                for s in 0..=steps {
                    let t = len * s as f64 / steps as f64;
                    let x = x0
                        + slant * t
                        + bend * (t / len).powi(2)
                        + 1.1 * (wiggle_phase + wiggle_freq * t).sin();
                    let py = (y0 + t).round() as i64;
                    if py < 0 || py >= spec.height as i64 {
                        continue;
                    }
                    for dx in 0..2i64 {
                        let px = x.round() as i64 + dx;
                        if px < 0 || px >= spec.width as i64 {
                            continue;
                        }
                        let (ux, uy) = (px as u32, py as u32);
                        if gt.as_ref().is_some_and(|e| e.contains(ux as f64, uy as f64)) {
                            continue;
                        }
                        img.set(ux, uy, shade);
                    }
                }
            }
        }
    }

    // Glints.
    if spec.glints.count > 0 {
        let gr = spec.glints.radius;
        for k in 0..spec.glints.count {
            let pos = match (spec.glints.placement, &gt) {
                (GlintPlacement::OnRimAt(t), Some(e)) => {
                    e.point_at((t + 0.2 * k as f64).rem_euclid(1.0) * std::f64::consts::TAU)
                }
                (GlintPlacement::OnRim, Some(e)) => {
                    // Corneal reflections appear where the eye is visible;
                    // keep rim glints off the covered boundary.
                    let mut p = e.point_at(0.0);
                    for _ in 0..200 {
                        let t = rng.gen_range(0.0..std::f64::consts::TAU);
                        p = e.point_at(t);
                        if y_lid.map_or(true, |yl| p[1] > yl + spec.glints.radius) {
                            break;
                        }
                    }
                    p
                }
                (placement, _) => {
                    let mut p = [icx, icy];
                    for _ in 0..200 {
                        let ang = rng.gen_range(0.0..std::f64::consts::TAU);
                        let rad = ir * rng.gen_range(0.0f64..1.0).sqrt();
                        p = [icx + rad * ang.cos(), icy + rad * ang.sin()];
                        match (placement, &gt) {
                            (GlintPlacement::AvoidRim, Some(e)) => {
                                if crate::ellipse::point_ellipse_distance(e, p) > gr + 4.0 {
                                    break;
                                }
                            }
                            _ => break,
                        }
                    }
                    p
                }
            };
            let gx0 = ((pos[0] - gr).floor().max(0.0)) as u32;
            let gx1 = (((pos[0] + gr).ceil() as i64 + 1).clamp(0, spec.width as i64)) as u32;
            let gy0 = ((pos[1] - gr).floor().max(0.0)) as u32;
            let gy1 = (((pos[1] + gr).ceil() as i64 + 1).clamp(0, spec.height as i64)) as u32;
            for y in gy0..gy1 {
                for x in gx0..gx1 {
                    if (x as f64 - pos[0]).hypot(y as f64 - pos[1]) <= gr {
                        img.set(x, y, spec.glints.intensity);
                    }
                }
            }
        }
    }

    // Seeded Gaussian noise, clamped to the 8-bit range.
    if spec.noise_sigma > 0.0 {
        let normal = rand_distr::Normal::new(0.0f64, spec.noise_sigma).unwrap();
        for y in 0..spec.height {
            for x in 0..spec.width {
                let n: f64 = rng.sample(normal);
                let v = (img.get(x, y) as f64 + n).round().clamp(0.0, 255.0);
                img.set(x, y, v as u8);
            }
        }
    }

    Ok((img, gt))
}

/// Boundary pixels of an ellipse on the integer grid: interior pixels with
/// at least one 4-neighbor outside. Matches the rasterization convention
/// used by [`render`].
pub fn boundary_pixels(e: &EllipseParams, width: u32, height: u32) -> Vec<(u32, u32)> {
    let mut out = Vec::new();
    let x0 = ((e.cx - e.a).floor().max(0.0)) as i64;
    let x1 = ((e.cx + e.a).ceil() as i64 + 1).clamp(0, width as i64);
    let y0 = ((e.cy - e.a).floor().max(0.0)) as i64;
    let y1 = ((e.cy + e.a).ceil() as i64 + 1).clamp(0, height as i64);
    for y in y0..y1 {
        for x in x0..x1 {
            if !e.contains(x as f64, y as f64) {
                continue;
            }
            let edge = [(x - 1, y), (x + 1, y), (x, y - 1), (x, y + 1)]
                .iter()
                .any(|&(nx, ny)| !e.contains(nx as f64, ny as f64));
            if edge {
                out.push((x as u32, y as u32));
            }
        }
    }
    out
}

/// Ground-truth class of a frame. A pupil with at most half of its boundary
/// visible counts as a negative sample, like a blink.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GtClass {
    Clean,
    Occluded,
    Absent,
}

impl GtClass {
    pub fn of(spec: &SceneSpec) -> GtClass {
        match &spec.pupil {
            None => GtClass::Absent,
            Some(_) if spec.occlusion >= 0.5 => GtClass::Absent,
            Some(_) if spec.occlusion > 0.0 => GtClass::Occluded,
            Some(_) => GtClass::Clean,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            GtClass::Clean => "clean",
            GtClass::Occluded => "occluded",
            GtClass::Absent => "absent",
        }
    }
}

/// One corpus entry: frame id, scene, and its ground-truth class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusFrame {
    pub id: String,
    pub class: GtClass,
    pub spec: SceneSpec,
}

/// Manifest entry written next to rendered frames.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestFrame {
    pub id: String,
    pub file: String,
    pub class: GtClass,
    pub occlusion: f64,
    pub pupil: Option<EllipseRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub frames: Vec<ManifestFrame>,
}

fn sample_scene(rng: &mut ChaCha8Rng, class: GtClass) -> SceneSpec {
    let a = rng.gen_range(46.0..65.0);
    let ratio = rng.gen_range(0.80..0.98);
    let theta = rng.gen_range(0.0..std::f64::consts::PI);
    // The iris is anatomically near constant; only the pupil dilates. Its
    // diameter exceeds the largest search aperture, so no window ever sees
    // a closed iris boundary.
    let iris_radius = rng.gen_range(180.0..215.0);
    let margin = a + 120.0;
    let cx = rng.gen_range(margin..1280.0 - margin);
    let cy = rng.gen_range(margin..720.0 - margin);
    // Keep the pupil-iris contrast well above the iris-sclera contrast so
    // the pupil, not the iris, is the frame's dominant dark blob.
    let iris_intensity = rng.gen_range(125..150) as u8;
    let sclera_intensity = iris_intensity + rng.gen_range(40..50) as u8;
    let pupil_intensity = iris_intensity - rng.gen_range(105..120) as u8;
    let noise_sigma = rng.gen_range(0.5..2.0);
    let seed = rng.gen();
    let glint_count = rng.gen_range(0..3);
    let base = SceneSpec {
        width: 1280,
        height: 720,
        pupil: Some(EllipseRecord { cx, cy, a, b: a * ratio, theta_deg: theta.to_degrees() }),
        iris_cx: cx,
        iris_cy: cy,
        iris_radius,
        pupil_intensity,
        iris_intensity,
        sclera_intensity,
        occlusion: 0.0,
        glints: GlintSpec { count: glint_count, ..GlintSpec::default() },
        lashes: 0,
        noise_sigma,
        seed,
    };
    match class {
        GtClass::Clean => base,
        GtClass::Occluded => SceneSpec {
            occlusion: rng.gen_range(0.25..0.45),
            lashes: rng.gen_range(8..16),
            ..base
        },
        GtClass::Absent => SceneSpec {
            pupil: None,
            // Lid covers essentially the whole iris; closed eyes show no
            // corneal glints, just the lash fringe.
            occlusion: rng.gen_range(0.97..1.0),
            glints: GlintSpec { count: 0, ..GlintSpec::default() },
            lashes: rng.gen_range(10..18),
            ..base
        },
    }
}

/// Deterministic corpus with the acceptance mix: 114 clean, 44 occluded
/// (25..45% of the boundary), 42 blink frames.
pub fn acceptance_corpus(seed: u64) -> Vec<CorpusFrame> {
    corpus(seed, 114, 44, 42)
}

/// Small corpus for smoke tests and examples.
pub fn smoke_corpus(seed: u64) -> Vec<CorpusFrame> {
    corpus(seed, 12, 4, 4)
}

pub fn corpus(seed: u64, clean: usize, occluded: usize, blink: usize) -> Vec<CorpusFrame> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut classes = Vec::with_capacity(clean + occluded + blink);
    classes.extend(std::iter::repeat(GtClass::Clean).take(clean));
    classes.extend(std::iter::repeat(GtClass::Occluded).take(occluded));
    classes.extend(std::iter::repeat(GtClass::Absent).take(blink));
    // Fisher-Yates with the corpus rng keeps the mix order deterministic.
    for i in (1..classes.len()).rev() {
        let j = rng.gen_range(0..=i);
        classes.swap(i, j);
    }
    classes
        .into_iter()
        .enumerate()
        .map(|(i, class)| CorpusFrame {
            id: format!("frame_{i:04}"),
            class,
            spec: sample_scene(&mut rng, class),
        })
        .collect()
}
