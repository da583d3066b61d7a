#![allow(dead_code)]

pub mod oracle;

use bfrate::{make_ar1_model, Interval, ModelSpec, PriorSpec, SigmaSpec, TrueProcess};

pub fn reference_process() -> TrueProcess {
    TrueProcess::new(0.5, 1.0).unwrap()
}

pub fn stationary() -> Vec<Interval> {
    vec![Interval::open(-1.0, 1.0)]
}

pub fn explosive() -> Vec<Interval> {
    vec![Interval::closed(-1.5, -1.0), Interval::closed(1.0, 1.5)]
}

pub fn sigma_range() -> Vec<Interval> {
    vec![Interval::closed(0.1, 5.0)]
}

/// Models referenced by id in the fixture files.
pub fn model_by_id(id: &str) -> ModelSpec {
    let known = SigmaSpec::Known(1.0);
    match id {
        "M1" => make_ar1_model("M1", stationary(), known, PriorSpec::Uniform),
        "M2" => make_ar1_model("M2", explosive(), known, PriorSpec::Uniform),
        "M1prime" => make_ar1_model("M1prime", vec![Interval::open(0.0, 1.0)], known, PriorSpec::Uniform),
        "M3" => make_ar1_model("M3", vec![Interval::closed(-1.5, -1.0)], known, PriorSpec::Uniform),
        "M1sigma" => make_ar1_model("M1sigma", stationary(), SigmaSpec::Unknown(sigma_range()), PriorSpec::Uniform),
        "M2sigma" => make_ar1_model("M2sigma", explosive(), SigmaSpec::Unknown(sigma_range()), PriorSpec::Uniform),
        other => panic!("unknown fixture model {other}"),
    }
    .unwrap()
}
