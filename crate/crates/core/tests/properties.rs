use approx::assert_relative_eq;
use lattice_multipliers::fourier::{convolve_direct, convolve_fft, forward_dft, inverse_dft, transform_at};
use lattice_multipliers::lattice::{lp_norm, translate};
use lattice_multipliers::multiplier::{apply_multiplier, apply_multiplier_with, apply_sequence, Quadrature};
use lattice_multipliers::operators::{difference, laplacian, Variant};
use lattice_multipliers::{parse_symbol, Exponent, GridFunction, LatticeBox, TorusGrid, C64};
use proptest::prelude::*;

/// A function on a random box in dimension 1 or 2 with entries in the unit square.
fn grid_function() -> impl Strategy<Value = GridFunction> {
    (1usize..=2)
        .prop_flat_map(|d| {
            (
                prop::collection::vec(-4i64..=4, d),
                prop::collection::vec(0i64..=4, d),
            )
        })
        .prop_flat_map(|(lo, ext)| {
            let hi: Vec<i64> = lo.iter().zip(&ext).map(|(a, e)| a + e).collect();
            let bx = LatticeBox::new(lo, hi).unwrap();
            let len = bx.len();
            (Just(bx), prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), len))
        })
        .prop_map(|(bx, vals)| {
            GridFunction::new(bx, vals.into_iter().map(|(a, b)| C64::new(a, b)).collect()).unwrap()
        })
}

fn exponent() -> impl Strategy<Value = Exponent> {
    prop_oneof![
        (1.0f64..6.0).prop_map(Exponent::Finite),
        Just(Exponent::Infinity),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fft_round_trip(f in grid_function()) {
        let bx = f.bounding_box().clone();
        let sizes: Vec<usize> = (0..f.dim()).map(|a| bx.extent(a) + 3).collect();
        let grid = TorusGrid::new(&sizes).unwrap();
        let back = inverse_dft(&forward_dft(&f, &grid).unwrap(), &bx).unwrap();
        prop_assert!(back.max_abs_diff(&f).unwrap() < 1e-13);
    }

    #[test]
    fn fft_samples_match_direct_sum(f in grid_function(), x in -0.5f64..0.5) {
        let grid = TorusGrid::uniform(f.dim(), 16).unwrap();
        let s = forward_dft(&f, &grid).unwrap();
        let i = ((x + 0.5) * 16.0) as usize % 16;
        let xi = grid.point(i);
        prop_assert!((s.values()[i] - transform_at(&f, &xi).unwrap()).norm() < 1e-12);
    }

    #[test]
    fn convolution_paths_agree(f in grid_function(), seed in 0u64..1000) {
        let g = GridFunction::from_fn(LatticeBox::cube(f.dim(), 2).unwrap(), |n| {
            C64::new(((seed as i64 + n[0]) % 7) as f64, n.iter().sum::<i64>() as f64)
        })
        .unwrap();
        let a = convolve_direct(&f, &g).unwrap();
        let b = convolve_fft(&f, &g).unwrap();
        prop_assert!(a.max_abs_diff(&b).unwrap() < 1e-12);
    }

    #[test]
    fn lattice_norms_decrease_in_p(f in grid_function(), p in exponent(), q in exponent()) {
        let (p, q) = if p.as_f64() <= q.as_f64() { (p, q) } else { (q, p) };
        prop_assert!(lp_norm(&f, q) <= lp_norm(&f, p) * (1.0 + 1e-12));
    }

    #[test]
    fn exponential_symbol_translates(f in grid_function(), k in -3i64..=3) {
        let d = f.dim();
        let mut shift = vec![0i64; d];
        shift[0] = k;
        let spec = if d == 1 { format!("exp:k={k}") } else { format!("exp:k={k}/0") };
        let m = parse_symbol(&spec, d).unwrap();
        let window = f.bounding_box().grown(4);
        let out = apply_multiplier(&m, &f, &window, 1e-12).unwrap();
        // e^{2 pi i k xi} multiplies F f, so the output is f(n + k).
        let minus: Vec<i64> = shift.iter().map(|s| -s).collect();
        let want = translate(&f, &minus).unwrap();
        for n in window.points() {
            prop_assert!((out.get(&n) - want.get(&n)).norm() < 1e-12);
        }
    }

    #[test]
    fn differences_satisfy_summation_by_parts(f in grid_function(), g in grid_function()) {
        prop_assume!(f.dim() == g.dim());
        for j in 1..=f.dim() {
            let lhs = difference(&f, j, Variant::Forward).unwrap().inner(&g).unwrap();
            let rhs = f.inner(&difference(&g, j, Variant::Backward).unwrap()).unwrap();
            prop_assert!((lhs + rhs).norm() < 1e-12);
        }
    }
}

#[test]
fn composition_of_multipliers_is_product_of_symbols() {
    let d = 2;
    let a = parse_symbol("wavecos:t=1.25", d).unwrap();
    let b = parse_symbol("wavesinc:t=0.5", d).unwrap();
    let ab = parse_symbol("product(wavecos:t=1.25;wavesinc:t=0.5)", d).unwrap();
    let f = GridFunction::from_fn(LatticeBox::cube(d, 2).unwrap(), |n| C64::new(n[0] as f64, 1.0 - n[1] as f64)).unwrap();
    let window = LatticeBox::cube(d, 6).unwrap();
    let q = Quadrature::new(1e-12);
    let seq = apply_sequence(&[a, b], &f, &window, &q).unwrap();
    let prod = apply_multiplier_with(&ab, &f, &window, &q).unwrap();
    assert!(seq.output.max_abs_diff(&prod.output).unwrap() < 1e-11);
}

#[test]
fn laplacian_symbol_norm_is_four_d() {
    // sup |m| = 4d is reached at xi = (1/2, ..., 1/2); the checkerboard is an
    // eigenvector there, so on a large box the ratio approaches 4d.
    for d in 1..=2usize {
        let r = 12;
        let f = GridFunction::from_fn(LatticeBox::cube(d, r).unwrap(), |n| {
            let s: i64 = n.iter().sum();
            C64::new(if s.rem_euclid(2) == 0 { 1.0 } else { -1.0 }, 0.0)
        })
        .unwrap();
        let lf = laplacian(&f).unwrap();
        let interior = LatticeBox::cube(d, r - 1).unwrap();
        let inner = lf.restrict_to(&interior).unwrap();
        let g = f.restrict_to(&interior).unwrap();
        for n in interior.points() {
            assert_relative_eq!(inner.get(&n).re, -4.0 * d as f64 * g.get(&n).re, epsilon = 1e-12);
        }
    }
}
