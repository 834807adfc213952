use salad::pipeline::{run_salad, Mode, PipelineConfig};
use salad::synth::{generate, Pattern, SynthConfig};
use salad_core::evaluation::{score, EvalConfig};

fn main() {
    let families: Vec<(&str, Vec<&str>)> = vec![
        ("base",    vec!["spike@1000x3", "dip@1700x0.3", "shift@2400-2419x1.5"]),
        ("chained", vec!["spike@1000x3", "dip@1100x0.3", "shift@1200-1219x1.5"]),
    ];
    for (name, specs) in &families {
        for ds in 1u64..=6 {
            let mut cfg = SynthConfig::new(Pattern::Sine, 50, 3000);
            cfg.noise = 0.01;
            cfg.seed = ds;
            cfg.anomalies = specs.iter().map(|s| s.parse().unwrap()).collect();
            let (points, labels) = generate(&cfg).unwrap();
            let mut passes = vec![];
            for seed in 0..10u64 {
                let pc = PipelineConfig { b: 100, slack: 3, seed, mode: Mode::Salad };
                let (alerts, _) = run_salad(&points, &pc).unwrap();
                let report = score(&alerts, &labels, &EvalConfig { slack: 3 }).unwrap();
                if report.fscore == 1.0 { passes.push(seed); }
            }
            println!("{name} ds{ds}: pass {:?}", passes);
        }
    }
}
