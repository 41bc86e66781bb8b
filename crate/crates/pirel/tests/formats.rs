use pirel::csv_io::{read_measurements, read_stats, read_trajectory, write_measurements, write_stats, write_trajectory};
use pirel::params_file::{read_parameters, write_parameters};
use pirel_core::dual_processor_model;
use pirel_core::model::Measurement;
use pirel_core::neural::{initialize_parameters, Activation, LayerSpec, NetworkSpec};
use pirel_core::ode::{solve_forward_kolmogorov, DEFAULT_STEP};
use pirel_core::pigan::PredictionStats;
use pirel_core::pinn::PinnConfig;
use pirel_core::trajectory::uniform_grid;

#[test]
fn trajectory_csv_round_trips_bit_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let model = dual_processor_model();
    let grid = uniform_grid(0.0, 30.0, 0.5).unwrap();
    let t = solve_forward_kolmogorov(&model, &grid, DEFAULT_STEP).unwrap();
    let path = dir.path().join("t.csv");
    write_trajectory(&path, &t, model.up_states()).unwrap();
    assert_eq!(read_trajectory(&path).unwrap(), t);
    let header = std::fs::read_to_string(&path).unwrap();
    assert!(header.starts_with("t,p0,p1,p2,p3,R\n"));
}

#[test]
fn stats_csv_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let stats = PredictionStats {
        times: vec![0.0, 1.5],
        mean: vec![vec![1.0 / 3.0, 2.0 / 3.0], vec![0.1, 0.9]],
        std: vec![vec![1e-17, 0.25], vec![0.0, 0.125]],
        reliability_mean: vec![1.0, 0.1],
        reliability_std: vec![0.0, 3e-4],
    };
    let path = dir.path().join("s.csv");
    write_stats(&path, &stats).unwrap();
    assert_eq!(read_stats(&path).unwrap(), stats);
}

#[test]
fn measurements_round_trip_and_validate() {
    let dir = tempfile::tempdir().unwrap();
    let entries =
        vec![Measurement { t: 5.0, value: vec![0.9, 0.05, 0.03, 0.02] }, Measurement { t: 10.0, value: vec![0.6, 0.3, 0.06, 0.04] }];
    let path = dir.path().join("m.csv");
    write_measurements(&path, &entries).unwrap();
    assert_eq!(read_measurements(&path).unwrap().entries(), &entries[..]);

    std::fs::write(&path, "t,y0,y1\n5,0.7,0.7\n").unwrap();
    assert!(read_measurements(&path).is_err());
    std::fs::write(&path, "t,y0,y1\n5,0.5\n").unwrap();
    assert!(read_measurements(&path).is_err());
}

#[test]
fn parameter_file_round_trips_with_config() {
    let dir = tempfile::tempdir().unwrap();
    let spec = NetworkSpec::mlp(1, 2, 7, Activation::Tanh, LayerSpec::new(4, Activation::Softmax)).unwrap();
    let params = initialize_parameters(&spec, 5);
    let config = PinnConfig::standard(4, 5);
    let path = dir.path().join("net.params");
    write_parameters(&path, &spec, &params, Some(&config)).unwrap();
    let file = read_parameters(&path).unwrap();
    assert_eq!(file.network, spec);
    assert_eq!(file.config["collocation_count"], 40);
    assert_eq!(
        file.params.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
        params.as_slice().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
    );
}
