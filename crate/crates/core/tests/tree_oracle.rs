mod common;

use common::brute_parents;
use proptest::prelude::*;
use rstlab::index::PointSource;
use rstlab::ppp::{sample_ball, LazyField, PointSet, RegionSpec};
use rstlab::tree::{build_rst, build_rst_by_norm_order, in_degree_histogram, Parent};
use rstlab::Vector;

fn point_set(dim: usize, raw: &[Vec<f64>]) -> PointSet {
    PointSet::new(dim, raw.iter().map(|c| Vector::new(c.iter().copied()).unwrap()).collect()).unwrap()
}

#[test]
fn matches_brute_force_on_sampled_balls() {
    for dim in 2..=4 {
        for seed in 0..10 {
            let radius = match dim {
                2 => 7.0,
                3 => 3.5,
                _ => 2.4,
            };
            let pts = sample_ball(dim, radius, 500 + seed).unwrap();
            let tree = build_rst(&pts);
            assert_eq!(tree.parents(), brute_parents(pts.points()).as_slice(), "d={dim} seed={seed}");
        }
    }
}

#[test]
fn norm_order_builder_agrees() {
    for seed in 0..5 {
        let pts = sample_ball(2, 15.0, seed).unwrap();
        assert_eq!(build_rst(&pts).parents(), build_rst_by_norm_order(&pts).parents());
    }
}

#[test]
fn large_tree_is_valid() {
    let pts = sample_ball(2, (1e5 / std::f64::consts::PI).sqrt(), 77).unwrap();
    let tree = build_rst(&pts);
    assert!(tree.validate().is_empty());
    let hist = in_degree_histogram(&tree);
    let total: usize = hist.values().sum();
    assert_eq!(total, tree.len() + 1);
    let edges: usize = hist.iter().map(|(k, v)| k * v).sum();
    assert_eq!(edges, tree.len());
}

#[test]
fn lazy_field_agrees_with_realized_window_in_d3() {
    let field = LazyField::with_seed(3, 31);
    let window = field.realize(&RegionSpec::Ball { radius: 6.0 }).unwrap();
    let grid = window.index();
    for p in window.points() {
        assert_eq!(field.psi(p), grid.psi(p));
    }
    let tree = build_rst(&window);
    for (i, p) in window.points().iter().enumerate() {
        assert_eq!(tree.parent_point(i), field.psi(p));
    }
}

fn coords(dim: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, dim)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parent_map_matches_brute_force(raw in prop::collection::vec(coords(2), 1..80)) {
        let pts = point_set(2, &raw);
        let tree = build_rst(&pts);
        let expected = brute_parents(pts.points());
        prop_assert_eq!(tree.parents(), expected.as_slice());
    }

    #[test]
    fn tree_invariants_hold(raw in prop::collection::vec(coords(3), 1..120)) {
        let pts = point_set(3, &raw);
        let tree = build_rst(&pts);
        prop_assert!(tree.validate().is_empty());
        for i in 0..tree.len() {
            prop_assert!(tree.parent_point(i).norm() < pts.points()[i].norm());
            let mut cur = Some(i);
            let mut hops = 0;
            while let Some(c) = cur {
                cur = match tree.parents()[c] {
                    Parent::Origin => None,
                    Parent::Vertex(p) => Some(p),
                };
                hops += 1;
                prop_assert!(hops <= tree.len());
            }
        }
    }
}
