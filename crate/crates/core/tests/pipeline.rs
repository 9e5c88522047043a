use mds_recover::clustering::pgr_check;
use mds_recover::cmds::{double_center, embed, CmdsSpectrum};
use mds_recover::datagen::sample;
use mds_recover::diagnostics::ideal_rank;
use mds_recover::phase::{run_phase, Axis, ModelTemplate, PhaseGridConfig, RankChoice, RecoveryCriterion};
use mds_recover::{agreement, Algorithm, DissimilarityMatrix, Preset};

#[test]
fn high_snr_sample_is_recovered_by_every_algorithm() {
    let model = Preset::S2c.model(60, 200, 0.02).unwrap();
    let s = sample(&model, 4).unwrap();
    let r = ideal_rank(&model);
    let y = CmdsSpectrum::from_coordinates(&s.x).unwrap().embed(r).unwrap().coordinates;
    assert!(pgr_check(&y, &s.labels).unwrap().is_pgr);
    for algo in Algorithm::ALL {
        let labels = algo.cluster(&y, model.k(), 0).unwrap();
        assert_eq!(agreement(&labels, &s.labels).unwrap(), 1.0, "{algo}");
    }
}

#[test]
fn distance_and_coordinate_routes_agree() {
    let model = Preset::S2b.model(40, 20, 0.1).unwrap();
    let s = sample(&model, 1).unwrap();
    let via_coords = CmdsSpectrum::from_coordinates(&s.x).unwrap().embed(2).unwrap();
    let d = DissimilarityMatrix::from_coordinates(&s.x).unwrap();
    let via_distances = embed(&double_center(&d), 2).unwrap();
    for (a, b) in via_coords.kept_eigenvalues.iter().zip(&via_distances.kept_eigenvalues) {
        assert!((a - b).abs() <= 1e-9 * a.abs());
    }
}

#[test]
fn phase_grid_is_reproducible_and_monotone_in_noise() {
    let config = PhaseGridConfig {
        model: ModelTemplate::preset(Preset::S2a),
        axis: Axis::DSweep,
        fixed: 30,
        axis_values: vec![16, 64],
        sigma_values: vec![0.01, 0.3, 3.0],
        replicates: 6,
        clustering: Algorithm::default(),
        embedding_rank: RankChoice::ModelRank,
        debias: false,
        criterion: RecoveryCriterion::Agreement,
        base_seed: 9,
    };
    let a = run_phase(&config).unwrap();
    let b = run_phase(&config).unwrap();
    assert_eq!(a.fractions, b.fractions);
    for col in 0..2 {
        assert_eq!(a.fractions[0][col], 1.0);
        assert!(a.fractions[2][col] < 1.0);
    }
}
