//! Grid specs, lossless number formatting and the rayon executor.

use hermite_reach::ensemble::gaussian_cosine_coeffs;
use hermite_reach::io::{fmt_f64, parse_grid};
use hermite_reach::Rayon;
use hermite_reach_core::bergman::{bergman_norm, BergmanWeight, Domain, SquareDomain};
use hermite_reach_core::images::{phi_segment, ImagesConfig};
use hermite_reach_core::{ControlSignal, Executor, Sequential};
use proptest::prelude::*;

#[test]
fn grid_specs() {
    assert_eq!(parse_grid("0.25").unwrap(), vec![0.25]);
    assert_eq!(parse_grid("1, 2,3").unwrap(), vec![1.0, 2.0, 3.0]);
    assert_eq!(
        parse_grid("-1:1:5").unwrap(),
        vec![-1.0, -0.5, 0.0, 0.5, 1.0]
    );
    assert_eq!(parse_grid("2:2:1").unwrap(), vec![2.0]);
    for bad in [
        "", "a", "0:1", "0:1:0", "0:1:1", "0:1:x", "1:2:3:4", "nan", "inf",
    ] {
        assert!(parse_grid(bad).is_err(), "{bad:?}");
    }
}

proptest! {
    #[test]
    fn seventeen_digits_round_trip(bits in any::<u64>()) {
        let x = f64::from_bits(bits);
        prop_assume!(x.is_finite());
        prop_assert_eq!(fmt_f64(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
    }
}

#[test]
fn rayon_keeps_index_order() {
    let ex = Rayon::new(Some(4)).unwrap();
    assert_eq!(ex.threads(), 4);
    let v = ex.map(10_000, |i| i * i);
    assert!(v.iter().enumerate().all(|(i, &x)| x == i * i));
}

#[test]
fn parallel_and_sequential_results_are_bitwise_equal() {
    let ex = Rayon::new(Some(3)).unwrap();
    let cfg = ImagesConfig::default();
    let u = ControlSignal::cosine(vec![1.0, -0.5, 0.25], 0.4).unwrap();
    let f = |z| phi_segment(&u, &u, 0.4, z, &cfg);
    let dom = Domain::Square(SquareDomain::d());
    let a = bergman_norm(&ex, f, &dom, &BergmanWeight::Unit, 3).unwrap();
    let b = bergman_norm(&Sequential, f, &dom, &BergmanWeight::Unit, 3).unwrap();
    assert_eq!(a.to_bits(), b.to_bits());
}

#[test]
fn ensembles_are_seeded_and_standard_normal() {
    assert_eq!(
        gaussian_cosine_coeffs(7, 3, 4),
        gaussian_cosine_coeffs(7, 3, 4)
    );
    assert_ne!(
        gaussian_cosine_coeffs(7, 3, 4),
        gaussian_cosine_coeffs(8, 3, 4)
    );
    let big: Vec<f64> = gaussian_cosine_coeffs(1, 20_000, 1)
        .into_iter()
        .flatten()
        .collect();
    let n = big.len() as f64;
    let mean = big.iter().sum::<f64>() / n;
    let var = big.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    // five standard errors
    assert!(mean.abs() < 5.0 / n.sqrt(), "{mean}");
    assert!((var - 1.0).abs() < 5.0 * (2.0 / n).sqrt(), "{var}");
}
