use std::ffi::{CStr, CString};
use std::ptr;

use structprior::annotate::{annotate, AnnotateParams};
use structprior::distance::{statistics_distance, Metric};
use structprior::distributions::{binomial_pmf, make_posterior, PosteriorSpec};
use structprior::env::{EnvConfig, ReasoningTreeEnv, State};
use structprior::verifier::{train, LossMode, ModelFile, TrainConfig};
use structprior_ffi::*;

const CONFIG: EnvConfig = EnvConfig { branching: 3, depth: 5, seed: 9, policy_beta: 1.0, threshold: 0.2 };

fn new_env() -> *mut SpEnv {
    let mut env = ptr::null_mut();
    let status = unsafe {
        sp_env_new(CONFIG.branching as u32, CONFIG.depth as u32, CONFIG.seed, CONFIG.policy_beta, CONFIG.threshold, &mut env)
    };
    assert_eq!(status, SpStatus::Ok);
    assert!(!env.is_null());
    env
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(sp_last_error_message()) }.to_string_lossy().into_owned()
}

#[test]
fn env_values_match_core() {
    let env = new_env();
    let core = ReasoningTreeEnv::new(CONFIG).unwrap();
    for path in [vec![], vec![0u32], vec![2, 1], vec![1, 1, 0, 2, 2]] {
        let mut v = f64::NAN;
        let status = unsafe { sp_env_true_value(env, 4, path.as_ptr(), path.len(), &mut v) };
        assert_eq!(status, SpStatus::Ok);
        let state = State { problem: 4, path: path.iter().map(|&a| a as usize).collect() };
        assert_eq!(v, core.true_value(&state).unwrap());
    }

    let leaf = [0u32, 1, 2, 0, 1];
    let mut correct = -1;
    assert_eq!(unsafe { sp_env_leaf_correct(env, 4, leaf.as_ptr(), leaf.len(), &mut correct) }, SpStatus::Ok);
    let state = State { problem: 4, path: leaf.iter().map(|&a| a as usize).collect() };
    assert_eq!(correct == 1, core.leaf_correct(&state).unwrap());

    let mut buf = [0 as std::ffi::c_char; 65];
    assert_eq!(unsafe { sp_env_hash(env, buf.as_mut_ptr(), buf.len()) }, SpStatus::Ok);
    let hash = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_str().unwrap().to_owned();
    assert_eq!(hash, CONFIG.hash());
    assert_eq!(unsafe { sp_env_hash(env, buf.as_mut_ptr(), 64) }, SpStatus::BufferTooSmall);

    unsafe { sp_env_free(env) };
}

#[test]
fn env_from_json_round_trips() {
    let json = CString::new(serde_json::to_string(&CONFIG).unwrap()).unwrap();
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { sp_env_from_json(json.as_ptr(), &mut env) }, SpStatus::Ok);
    unsafe { sp_env_free(env) };

    let bad = CString::new("{\"branching\": 3").unwrap();
    assert_eq!(unsafe { sp_env_from_json(bad.as_ptr(), &mut env) }, SpStatus::ParseError);
    assert!(last_error().contains("env config"));
}

#[test]
fn invalid_arguments_report_status_and_message() {
    let mut env = ptr::null_mut();
    assert_eq!(unsafe { sp_env_new(1, 4, 0, 1.0, 0.0, &mut env) }, SpStatus::InvalidArgument);
    assert!(env.is_null());
    assert!(!last_error().is_empty());

    assert_eq!(unsafe { sp_env_new(3, 4, 0, 1.0, 0.0, ptr::null_mut()) }, SpStatus::NullPointer);

    let env = new_env();
    let too_long = [0u32; 6];
    let mut v = 0.0;
    assert_eq!(unsafe { sp_env_true_value(env, 0, too_long.as_ptr(), too_long.len(), &mut v) }, SpStatus::InvalidArgument);
    let bad_action = [7u32];
    assert_eq!(unsafe { sp_env_true_value(env, 0, bad_action.as_ptr(), 1, &mut v) }, SpStatus::InvalidArgument);
    assert_eq!(unsafe { sp_env_true_value(env, 0, ptr::null(), 2, &mut v) }, SpStatus::NullPointer);
    unsafe { sp_env_free(env) };
    unsafe { sp_env_free(ptr::null_mut()) };
}

#[test]
fn distributions_match_core() {
    let mut buf = [0.0; 9];
    assert_eq!(unsafe { sp_binomial_pmf(8, 0.3, buf.as_mut_ptr(), buf.len()) }, SpStatus::Ok);
    assert_eq!(&buf[..], binomial_pmf(8, 0.3).unwrap().probs());
    assert_eq!(unsafe { sp_binomial_pmf(8, 0.3, buf.as_mut_ptr(), 8) }, SpStatus::BufferTooSmall);

    assert_eq!(unsafe { sp_make_posterior(SpPosterior::GaussDynamic, 0.0, 3, 8, buf.as_mut_ptr(), 9) }, SpStatus::Ok);
    assert_eq!(&buf[..], make_posterior(&PosteriorSpec::GAUSS_DYNAMIC, 3, 8).unwrap().probs());
    assert_eq!(unsafe { sp_make_posterior(SpPosterior::GaussStatic, 0.0, 3, 8, buf.as_mut_ptr(), 9) }, SpStatus::Ok);
    assert_eq!(&buf[..], make_posterior(&PosteriorSpec::GAUSS_STATIC, 3, 8).unwrap().probs());
    assert_eq!(unsafe { sp_make_posterior(SpPosterior::OneHot, 0.0, 9, 8, buf.as_mut_ptr(), 9) }, SpStatus::InvalidArgument);

    let mut d = 0.0;
    let status = unsafe { sp_statistics_distance(SpPosterior::GaussStatic, 0.1, 8, 0.4, SpMetric::Wasserstein, &mut d) };
    assert_eq!(status, SpStatus::Ok);
    let expected = statistics_distance(&PosteriorSpec::gauss_static(0.1).unwrap(), 8, 0.4, Metric::Wasserstein).unwrap();
    assert_eq!(d, expected);

    let status = unsafe { sp_statistics_distance(SpPosterior::GaussStatic, 0.0, 8, 0.0, SpMetric::Kl, &mut d) };
    assert_eq!(status, SpStatus::Ok);
    assert_eq!(d, f64::INFINITY);

    let a = [1.0, 0.0, 0.0];
    let b = [0.0, 0.0, 1.0];
    assert_eq!(unsafe { sp_wasserstein1(a.as_ptr(), b.as_ptr(), 3, &mut d) }, SpStatus::Ok);
    assert!((d - 1.0).abs() < 1e-12);
    let not_normalized = [0.5, 0.0, 0.0];
    assert_eq!(unsafe { sp_wasserstein1(a.as_ptr(), not_normalized.as_ptr(), 3, &mut d) }, SpStatus::InvalidArgument);

    assert!((sp_std_normal_cdf(0.0) - 0.5).abs() < 1e-15);
}

#[test]
fn model_load_and_predict() {
    let core = ReasoningTreeEnv::new(CONFIG).unwrap();
    let data = annotate(&core, &AnnotateParams { n_problems: 10, n_solutions: 3, k: 4, problem_offset: 0 }, 5).unwrap();
    let mut config = TrainConfig::new(LossMode::ScalarMse, PosteriorSpec::ONE_HOT);
    config.hidden = vec![8];
    config.epochs = 2;
    let outcome = train(&core, &data, &config).unwrap();
    let file = ModelFile::new(&outcome, &config, &data);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    file.write(std::fs::File::create(&path).unwrap()).unwrap();

    let c_path = CString::new(path.to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { sp_model_load(c_path.as_ptr(), &mut model) }, SpStatus::Ok);
    let env = new_env();
    let actions = [1u32, 0, 2];
    let mut v = f64::NAN;
    assert_eq!(unsafe { sp_model_predict(model, env, 3, actions.as_ptr(), actions.len(), &mut v) }, SpStatus::Ok);
    let state = State { problem: 3, path: vec![1, 0, 2] };
    assert_eq!(v, outcome.model.score_state(&core, &state).unwrap());
    unsafe {
        sp_model_free(model);
        sp_env_free(env);
    }

    let missing = CString::new(dir.path().join("nope.json").to_str().unwrap()).unwrap();
    let mut model = ptr::null_mut();
    assert_eq!(unsafe { sp_model_load(missing.as_ptr(), &mut model) }, SpStatus::IoError);
    std::fs::write(&path, "{}").unwrap();
    assert_eq!(unsafe { sp_model_load(c_path.as_ptr(), &mut model) }, SpStatus::ParseError);
}

#[test]
fn version_is_package_version() {
    let v = unsafe { CStr::from_ptr(sp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/structprior.h")).unwrap();
    let source = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = source
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 14);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else { return };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    std::fs::write(
        &src,
        "#include \"structprior.h\"\nint main(void) { SpEnv *e = 0; double v; return sp_env_true_value(e, 0, 0, 0, &v) == SP_STATUS_NULL_POINTER ? 0 : 1; }\n",
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

fn which_cc() -> Result<String, ()> {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    match std::process::Command::new(&cc).arg("--version").output() {
        Ok(o) if o.status.success() => Ok(cc),
        _ => Err(()),
    }
}
