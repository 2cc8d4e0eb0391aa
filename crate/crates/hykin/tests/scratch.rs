use std::time::Instant;

use hykin::config::{Strategy, TrainConfig};
use hykin::data::{generate, Dataset};
use hykin::train::{evaluate, train_with};

fn trend_cfg(seed: u64) -> TrainConfig {
    let mut cfg = TrainConfig::default();
    cfg.seed = seed;
    cfg.strategy = Strategy::Token;
    cfg.d_gcn = 16;
    cfg.d_model = 16;
    cfg.d_hyp = 16;
    cfg.batch_size = 64;
    cfg.epochs = 10;
    cfg.lr = 3e-3;
    cfg.hyp_lr = 3e-3;
    cfg.warmup_epochs = 1.0;
    cfg.alpha_init = 0.5;
    cfg
}

fn probe(tag: &str, cfg: &TrainConfig, ds: &Dataset) {
    let t0 = Instant::now();
    let out = train_with(cfg, ds, false).unwrap();
    let e = &out.eval;
    let hands = 0.5 * (e.radii[1] + e.radii[2]);
    let mut degr = Vec::new();
    for sigma in [0.02f64, 0.03] {
        let noisy = evaluate(&out.model, &out.store, ds, sigma, cfg.seed + 1000).unwrap();
        degr.push((e.top1 - noisy.top1) / e.top1.max(1e-9));
    }
    let last = out.metrics.last().unwrap();
    println!(
        "[{tag}] {:.0?} top1={:.3} top5={:.3} c={:.4} eval_radii=[{:.3} {:.3} {:.3} {:.3}] hands-body={:+.3} degr=[{:.3} {:.3}]",
        t0.elapsed(),
        e.top1,
        e.top5,
        last.c,
        e.radii[0],
        e.radii[1],
        e.radii[2],
        e.radii[3],
        hands - e.radii[0],
        degr[0],
        degr[1]
    );
}

#[test]
#[ignore]
fn knob_matrix() {
    let mut base = trend_cfg(42);
    base.tau0 = 0.15;
    base.hyp_lr = 1e-2;
    base.epochs = 10;
    let ds = generate(&base).unwrap();
    for d_hyp in [4usize, 16] {
        for seed in [42u64, 7, 1234] {
            for strategy in [Strategy::Token, Strategy::EuclideanToken] {
                let mut cfg = base.clone();
                cfg.d_hyp = d_hyp;
                cfg.seed = seed;
                cfg.strategy = strategy;
                probe(
                    &format!("d={d_hyp} seed={seed} {}", strategy.as_str()),
                    &cfg,
                    &ds,
                );
            }
        }
    }
    for d_hyp in [4usize, 16] {
        let mut cfg = base.clone();
        cfg.d_hyp = d_hyp;
        cfg.seed = 42;
        cfg.init_c = 0.1;
        probe(&format!("drift d={d_hyp} c0=0.1"), &cfg, &ds);
    }
}
