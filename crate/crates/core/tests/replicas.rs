use reinforced::experiments::{run_replicas, run_replicas_with, Execution, ExperimentConfig, Model};

#[test]
fn mon_implies_creat_and_loctrapp_implies_monot() {
    for p in [1.0, 2.5, 4.0] {
        let config = ExperimentConfig { model: Model::Nczr, p, q: 0.0, r: 0.0, horizon: 2_000, replicas: 40, seed: 5, ..Default::default() };
        for r in run_replicas(&config).unwrap() {
            assert!(r.mon != Some(true) || r.creat == Some(true), "{r:?}");
        }
    }
    for (w1, w2) in [("pow+1:p=3", "pow:s=0"), ("pow+1:p=1", "pow+1:p=1"), ("exp:beta=1", "pow+1:p=1")] {
        let config = ExperimentConfig {
            model: Model::Ant,
            graph: "figure3".into(),
            walkers: 2,
            w1: w1.parse().unwrap(),
            w2: w2.parse().unwrap(),
            horizon: 2_000,
            replicas: 40,
            seed: 6,
            ..Default::default()
        };
        for r in run_replicas(&config).unwrap() {
            assert!(r.loctrapp != Some(true) || r.monot == Some(true), "{r:?}");
        }
    }
}

#[test]
fn parallel_and_sequential_agree_for_every_model() {
    for model in [Model::Nczr, Model::Ant, Model::Bins] {
        let config = ExperimentConfig { model, horizon: 500, replicas: 12, seed: 99, ..Default::default() };
        let a = run_replicas_with(&config, Execution::Parallel).unwrap();
        let b = run_replicas_with(&config, Execution::Sequential).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().enumerate().all(|(i, r)| r.replica == i as u64));
    }
}
