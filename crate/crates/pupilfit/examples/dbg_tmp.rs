use pupilfit::config::Config;
use pupilfit::detector::detect;
use pupilfit::synth::{acceptance_corpus, render, GtClass};

fn main() {
    let corpus = acceptance_corpus(7);
    let cfg = Config::default();
    let mut agg: std::collections::BTreeMap<&str, ([f64; 6], f64, usize)> = Default::default();
    let mut misses = vec![];
    for f in &corpus {
        let (img, gt) = render(&f.spec).unwrap();
        let res = detect(&img, &cfg).unwrap();
        let key = match f.class {
            GtClass::Clean => "clean",
            GtClass::Occluded => "occluded",
            GtClass::Absent => "blink",
        };
        let e = agg.entry(key).or_insert(([0.0; 6], 0.0, 0));
        let t = &res.timings;
        for (i, v) in [t.roi, t.edges, t.entropy, t.corners, t.arcs, t.selection].iter().enumerate() {
            e.0[i] += *v as f64;
        }
        e.1 += t.total() as f64;
        e.2 += 1;
        let good = match (f.class, &res.ellipse) {
            (GtClass::Absent, None) => true,
            (GtClass::Absent, Some(_)) => false,
            (_, Some(e)) => gt.map_or(false, |g| pupilfit::ellipse::overlap_ratio(e, &g, (1280, 720)) >= 0.8),
            (_, None) => false,
        };
        if !good {
            misses.push(format!("{} {:?} path {:?} cost {:?}", f.id, f.class, res.path, res.cost));
        }
    }
    for (k, (stages, total, n)) in &agg {
        let nf = *n as f64;
        println!(
            "{k:9} n={n}: roi {:.0} edges {:.0} entropy {:.0} corners {:.0} arcs {:.0} sel {:.0} | total {:.0} us",
            stages[0]/nf, stages[1]/nf, stages[2]/nf, stages[3]/nf, stages[4]/nf, stages[5]/nf, total/nf
        );
    }
    for m in &misses { println!("MISS {m}"); }
}
