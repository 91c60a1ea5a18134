use reinforced::experiments::{run_replicas, ExperimentConfig, Model};

fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            ((i as f64 + 1.0) / n - f).max(f - i as f64 / n)
        })
        .fold(0.0, f64::max)
}

fn fractions(feedback: &str) -> Vec<f64> {
    let config = ExperimentConfig {
        model: Model::Bins,
        bins: 2,
        initial: Some(vec![1, 1]),
        feedback: feedback.parse().unwrap(),
        horizon: 10_000,
        window: Some(1_000),
        replicas: 2000,
        seed: 21,
        ..Default::default()
    };
    run_replicas(&config).unwrap().iter().map(|r| r.bin0_fraction.unwrap()).collect()
}

#[test]
fn linear_feedback_from_one_ball_each_has_uniform_limit() {
    // f(k) = k is the classical urn with one ball of each colour.
    let d = ks(fractions("pow:s=1"), |x| x);
    assert!(d < 0.05, "KS distance {d}");
}

#[test]
fn shifted_linear_feedback_has_beta_2_2_limit() {
    let xs = fractions("pow+1:p=1");
    let d_beta = ks(xs.clone(), |x| 3.0 * x * x - 2.0 * x * x * x);
    let d_uniform = ks(xs, |x| x);
    assert!(d_beta < 0.05, "KS distance to Beta(2,2) {d_beta}");
    assert!(d_uniform > 0.05, "KS distance to Uniform {d_uniform}");
}
