mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tra_core::generate::{gen_random_forest, gen_random_tree};
use tra_core::oracle::{
    exact_ensemble_cf, exact_tree_cf, heuristic_cf, line_search, verify_local_optimality, CfOracle, CounterfactualOracle,
    Distance,
};
use tra_core::{Label, Model, Node, Point, Split, TreeModel};

use common::{all_points, random_region, small_schemas};

/// Minimum distance over all label-flipping grid points of the region.
fn brute_force(schema: &tra_core::FeatureSchema, model: &Model, points: &[Point], x: &Point, region: &tra_core::Region, d: Distance) -> Option<f64> {
    let label = model.predict(x);
    points
        .iter()
        .filter(|p| region.contains(schema, p) && model.predict(p) != label)
        .map(|p| d.between(schema, x, p))
        .min_by(|a, b| a.partial_cmp(b).unwrap())
}

#[test]
fn exact_oracles_match_brute_force() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut models = 0;
    for (si, schema) in small_schemas().iter().enumerate() {
        let points = all_points(schema);
        for k in 0..4u64 {
            let seed = 100 * si as u64 + k;
            let model: Model = if k % 2 == 0 {
                gen_random_tree(schema, 2 + k as u32, 2 + (k as u32 % 3), seed).unwrap().into()
            } else {
                gen_random_forest(schema, 3, 2, 2, seed).unwrap().into()
            };
            models += 1;
            for q in 0..1000 {
                let d = if q % 2 == 0 { Distance::L2 } else { Distance::L1 };
                let region = random_region(schema, &mut rng);
                let x = region.sample(schema, &mut rng);
                let got = match &model {
                    Model::Tree(t) => exact_tree_cf(schema, t, &x, &region, d),
                    Model::Forest(f) => exact_ensemble_cf(schema, f, &x, &region, d, u128::MAX).unwrap(),
                };
                let want = brute_force(schema, &model, &points, &x, &region, d);
                match (got, want) {
                    (None, None) => {}
                    (Some(p), Some(best)) => {
                        assert!(region.contains(schema, &p));
                        assert_ne!(model.predict(&p), model.predict(&x));
                        assert_eq!(d.between(schema, &x, &p), best, "schema {si}, model {k}, query {q}");
                        assert!(verify_local_optimality(schema, &model, &x, &p, d));
                    }
                    (g, w) => panic!("schema {si}, model {k}: oracle {g:?} vs brute force {w:?}"),
                }
            }
        }
    }
    assert!(models >= 20);
}

#[test]
fn chessboard_tie_break_is_lexicographic() {
    let schema = tra_core::FeatureSchema::unit_cube(2, 0.125).unwrap();
    let t = tra_core::generate::gen_chessboard(&schema, &[1, 1]).unwrap();
    let x = schema.encode(&[2, 2]).unwrap();
    let cf = exact_tree_cf(&schema, &t, &x, &schema.full_region(), Distance::L2).unwrap();
    // (0.25, 0.5 + delta) beats (0.5 + delta, 0.25)
    assert_eq!(cf.coords(), &[2, 5]);
}

#[test]
fn ensemble_cell_cap_is_enforced() {
    let schema = tra_core::FeatureSchema::unit_cube(2, 1.0 / 64.0).unwrap();
    let forest = tra_core::ForestModel::new(vec![
        tra_core::generate::gen_chessboard(&schema, &[2, 3]).unwrap(),
    ])
    .unwrap();
    let x = schema.encode(&[0, 0]).unwrap();
    assert_eq!(tra_core::oracle::grid_cell_count(&schema, &forest, &schema.full_region()), 12);
    let err = exact_ensemble_cf(&schema, &forest, &x, &schema.full_region(), Distance::L2, 10).unwrap_err();
    assert!(matches!(err, tra_core::Error::Capacity(_)));
    let one = exact_ensemble_cf(&schema, &forest, &x, &schema.full_region(), Distance::L2, 12).unwrap();
    let tree = exact_tree_cf(&schema, &forest.trees()[0], &x, &schema.full_region(), Distance::L2);
    assert_eq!(one, tree);
}

#[test]
fn heuristic_outputs_are_locally_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (si, schema) in small_schemas().iter().enumerate() {
        for seed in 0..5 {
            let model: Model = gen_random_tree(schema, 4, 2, seed + 10 * si as u64).unwrap().into();
            let training: Vec<Point> = (0..50).map(|_| schema.full_region().sample(schema, &mut rng)).collect();
            for _ in 0..100 {
                let region = random_region(schema, &mut rng);
                let x = region.sample(schema, &mut rng);
                if let Some(cf) = heuristic_cf(schema, &model, &x, &region, &training, 1000, &mut rng) {
                    assert!(region.contains(schema, &cf));
                    assert!(verify_local_optimality(schema, &model, &x, &cf, Distance::L2));
                    assert!(verify_local_optimality(schema, &model, &x, &cf, Distance::L1));
                }
            }
        }
    }
}

fn single_split(t: u32, n_axes: usize) -> Model {
    Model::Tree(
        TreeModel::from_nodes(
            &[
                Node::Split { split: Split::new(0, t), left: 1, right: 2 },
                Node::Leaf { label: Label(0) },
                Node::Leaf { label: Label(1) },
            ],
            0,
            n_axes,
        )
        .unwrap(),
    )
}

#[test]
fn line_search_examples() {
    let schema = tra_core::FeatureSchema::unit_cube(1, 1.0 / 1024.0).unwrap();
    let target = single_split(512, 1);
    let x = schema.encode(&[205]).unwrap();
    let far = schema.encode(&[922]).unwrap();
    assert_eq!(line_search(&schema, &target, &x, &far).unwrap().coords(), &[513]);
    let edge = schema.encode(&[513]).unwrap();
    assert_eq!(line_search(&schema, &target, &x, &edge).unwrap(), edge);
    assert!(line_search(&schema, &target, &x, &x).is_err());

    // flip region: z0 > 4 and z1 > 4 on a 9x9 grid; only the second axis can move
    let s2 = tra_core::FeatureSchema::unit_cube(2, 0.125).unwrap();
    let l_shape = Model::Tree(
        TreeModel::from_nodes(
            &[
                Node::Split { split: Split::new(0, 4), left: 1, right: 2 },
                Node::Leaf { label: Label(0) },
                Node::Split { split: Split::new(1, 4), left: 3, right: 4 },
                Node::Leaf { label: Label(0) },
                Node::Leaf { label: Label(1) },
            ],
            0,
            2,
        )
        .unwrap(),
    );
    let x = s2.encode(&[8, 0]).unwrap();
    let cand = s2.encode(&[8, 8]).unwrap();
    assert_eq!(line_search(&s2, &l_shape, &x, &cand).unwrap().coords(), &[8, 5]);
}

#[test]
fn verifier_rejects_interior_points() {
    let schema = tra_core::FeatureSchema::unit_cube(2, 1.0 / 64.0).unwrap();
    let target = single_split(32, 2);
    let x = schema.encode(&[0, 0]).unwrap();
    assert!(!verify_local_optimality(&schema, &target, &x, &schema.encode(&[60, 10]).unwrap(), Distance::L2));
    assert!(verify_local_optimality(&schema, &target, &x, &schema.encode(&[33, 0]).unwrap(), Distance::L2));
    assert!(!verify_local_optimality(&schema, &target, &x, &schema.encode(&[3, 0]).unwrap(), Distance::L2));
}

#[test]
fn heuristic_finds_half_volume_flips() {
    let schema = tra_core::FeatureSchema::unit_cube(2, 1.0 / 1024.0).unwrap();
    let target = single_split(511, 2);
    let config = tra_core::oracle::OracleConfig::heuristic(tra_core::oracle::HeuristicParams { seed: 4, ..Default::default() });
    let mut o = CfOracle::new(&schema, &target, config).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..200 {
        let x = schema.encode(&[rng.gen_range(0..=511), rng.gen_range(0..=1024)]).unwrap();
        let r = o.query(&x, &schema.full_region()).unwrap();
        let cf = r.counterfactual.expect("half the domain flips");
        assert_eq!(cf.coords(), &[512, x.get(1)]);
    }
    assert_eq!(o.queries(), 200);
}
