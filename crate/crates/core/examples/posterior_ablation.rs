//! Compares verifier objectives on the desk-scale reasoning tree.
//!
//! ```text
//! cargo run --release -p structprior --example posterior_ablation -- [hidden] [epochs] [lr] [batch]
//! ```
//!
//! For each seed: calibrate the threshold to a root value of 0.3, annotate
//! 200 problems x 15 solutions with k = 8, train one model per objective
//! and report held-out MAE against the exact value, BoN@16 and beam search.

use rayon::prelude::*;

use structprior::annotate::{annotate, AnnotateParams};
use structprior::distributions::PosteriorSpec;
use structprior::env::{calibrate_threshold, EnvConfig, ReasoningTreeEnv};
use structprior::eval::{beam_search_eval, best_of_n, EvalProblems, TrueValueScorer};
use structprior::verifier::{featurize, train, LossMode, Supervision, TrainConfig};

fn main() {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let hidden: Vec<usize> = args.first().map_or(vec![32, 32], |s| s.split(',').map(|x| x.parse().unwrap()).collect());
    let epochs: usize = args.get(1).map_or(10, |s| s.parse().unwrap());
    let lr: f64 = args.get(2).map_or(3e-3, |s| s.parse().unwrap());
    let batch: usize = args.get(3).map_or(64, |s| s.parse().unwrap());

    let objectives = [
        ("scalar-mse", LossMode::ScalarMse, PosteriorSpec::ONE_HOT, Supervision::Process),
        ("exp-mse", LossMode::ExpMse, PosteriorSpec::ONE_HOT, Supervision::Process),
        ("hl+one-hot", LossMode::Hl, PosteriorSpec::ONE_HOT, Supervision::Process),
        ("hl+gauss-dynamic", LossMode::Hl, PosteriorSpec::GAUSS_DYNAMIC, Supervision::Process),
        ("hl+gauss-static", LossMode::Hl, PosteriorSpec::GAUSS_STATIC, Supervision::Process),
        ("combined", LossMode::Combined { alpha: 0.5 }, PosteriorSpec::GAUSS_DYNAMIC, Supervision::Process),
        ("scalar-mse outcome-only", LossMode::ScalarMse, PosteriorSpec::ONE_HOT, Supervision::OutcomeOnly),
    ];

    println!("seed,objective,mae,bon16,beam4x4");
    for seed in [11u64, 12, 13, 14, 15] {
        let mut config = EnvConfig { branching: 4, depth: 8, seed, policy_beta: 1.0, threshold: 0.0 };
        config.threshold = calibrate_threshold(&config, 0..200, 0.3).unwrap();
        let env = ReasoningTreeEnv::new(config).unwrap();
        let data = annotate(&env, &AnnotateParams { n_problems: 200, n_solutions: 15, k: 8, problem_offset: 0 }, seed)
            .unwrap();
        let held_out =
            annotate(&env, &AnnotateParams { n_problems: 200, n_solutions: 2, k: 1, problem_offset: 1_000_000 }, seed ^ 0xFFFF)
                .unwrap();
        let truth: Vec<_> = held_out
            .samples
            .par_iter()
            .map(|s| (featurize(&env, &s.state()).unwrap(), env.true_value(&s.state()).unwrap()))
            .collect();
        let problems = EvalProblems { n_problems: 200, problem_offset: 1_000_000, seed };

        let lines: Vec<String> = objectives
            .par_iter()
            .map(|(name, loss, posterior, supervision)| {
                let mut cfg = TrainConfig::new(*loss, *posterior);
                cfg.hidden = hidden.clone();
                cfg.epochs = epochs;
                cfg.learning_rate = lr;
                cfg.batch_size = batch;
                cfg.seed = seed;
                cfg.supervision = *supervision;
                let model = train(&env, &data, &cfg).unwrap().model;
                let mae = truth.iter().map(|(f, v)| (model.predict_value(f.as_slice()).unwrap() - v).abs()).sum::<f64>()
                    / truth.len() as f64;
                let bon = best_of_n(&env, &model, name, &[16], &problems).unwrap().rows[0].success_rate;
                let beam = beam_search_eval(&env, &model, name, 4, 4, &problems).unwrap().rows[0].success_rate;
                format!("{seed},{name},{mae:.5},{bon:.3},{beam:.3}")
            })
            .collect();
        for line in lines {
            println!("{line}");
        }
        let oracle = beam_search_eval(&env, &TrueValueScorer, "true-value", 4, 4, &problems).unwrap();
        println!("{seed},true-value,0,,{:.3}", oracle.rows[0].success_rate);
    }
}
