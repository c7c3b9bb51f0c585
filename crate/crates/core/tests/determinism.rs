use doubly_scenery::walk_scenery::ModelSimulator;
use doubly_scenery::{ModelLaws, SimParams, StreamKey};

fn replicas_with_threads(threads: usize) -> Vec<Vec<f64>> {
    let p = SimParams::new(1.0, 2.0, 2.0, 1.1).unwrap();
    let sim = ModelSimulator::new(&ModelLaws::canonical(&p)).unwrap();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool.install(|| {
        sim.aggregate_replicas(&p, 256, 8, &[0.5, 1.0, 2.0], 64, &StreamKey::root(11))
            .unwrap()
            .into_iter()
            .map(|s| s.g_values)
            .collect()
    })
}

#[test]
fn aggregate_replicas_do_not_depend_on_thread_count() {
    let one = replicas_with_threads(1);
    assert_eq!(one, replicas_with_threads(4));
    assert_eq!(one.len(), 64);
}

#[test]
fn replica_r_matches_direct_aggregate() {
    let p = SimParams::new(1.0, 2.0, 2.0, 1.1).unwrap();
    let sim = ModelSimulator::new(&ModelLaws::canonical(&p)).unwrap();
    let key = StreamKey::root(11);
    let all = replicas_with_threads(2);
    let direct = sim.aggregate(&p, 256, 8, &[0.5, 1.0, 2.0], &key.index(17)).unwrap();
    assert_eq!(all[17], direct.g_values);
}
