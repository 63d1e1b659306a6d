use proptest::prelude::*;

use super::*;

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn three_bid_tender() {
    let s = compute_screens(&[100.0, 110.0, 120.0]).unwrap();
    assert!(close(s.cv, 0.090_909_090_9, 1e-9), "{}", s.cv);
    assert!(close(s.spd, 0.2, 1e-15));
    assert!(close(s.diffp, 0.1, 1e-15));
    assert!(close(s.rd, 2f64.sqrt(), 1e-12), "{}", s.rd);
    assert!(close(s.std_dev, 10.0, 1e-12));
    assert!(s.undefined.kurt);
    assert!(!s.undefined.rd);
}

#[test]
fn symmetric_four_bids() {
    let s = compute_screens(&[1.0, 2.0, 3.0, 4.0]).unwrap();
    assert!(close(s.skew, 0.0, 1e-14));
    assert!(close(s.kurt, -1.2, 1e-12), "{}", s.kurt);
}

#[test]
fn single_bid_is_degenerate() {
    let s = compute_screens(&[5.0]).unwrap();
    assert_eq!((s.cv, s.rd, s.kurt, s.skew, s.kstest), (0.0, 0.0, 0.0, 0.0, 0.0));
    assert_eq!((s.spd, s.diffp), (0.0, 0.0));
    let u = s.undefined;
    assert!(u.cv && u.rd && u.kurt && u.skew && u.kstest);
}

#[test]
fn tied_cover_bids_give_zero_rd() {
    let s = compute_screens(&[90.0, 100.0, 100.0, 100.0]).unwrap();
    assert_eq!(s.rd, 0.0);
    assert!(s.undefined.rd);
}

#[test]
fn empty_tender_is_an_error() {
    assert!(matches!(compute_screens(&[]), Err(Error::Contract(_))));
}

#[test]
fn kstest_two_points() {
    assert!(close(kstest_uniform(&[0.0, 1.0]).unwrap(), 0.5, 1e-15));
}

#[test]
fn kstest_three_points() {
    // Steps of 1/3 at 0, 0.5, 1 against F(x) = x: the largest gap is the
    // first jump at x = 0 (and symmetrically the left limit at x = 1).
    assert!(close(kstest_uniform(&[0.0, 0.5, 1.0]).unwrap(), 1.0 / 3.0, 1e-15));
}

#[test]
fn kstest_equal_bids_undefined() {
    assert_eq!(kstest_uniform(&[3.0, 3.0, 3.0]), None);
}

#[test]
fn kstest_shrinks_with_equal_spacing() {
    let ds: Vec<f64> = (2..40)
        .map(|n| {
            let bids: Vec<f64> = (0..n).map(|i| 10.0 + i as f64).collect();
            kstest_uniform(&bids).unwrap()
        })
        .collect();
    assert!(ds.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn aba_three_bids() {
    let a = aba_averages(&[10.0, 20.0, 30.0], 0.0).unwrap();
    assert_eq!(a.a1, 20.0);
    assert_eq!(a.a2, Some(10.0));
    assert_eq!(a.winner, Some(20.0));
}

#[test]
fn aba_equal_bids() {
    let a = aba_averages(&[10.0, 10.0, 10.0], 0.0).unwrap();
    assert_eq!(a.a1, 10.0);
    assert_eq!(a.a2, None);
    assert_eq!(a.winner, None);
}

#[test]
fn aba_trimmed() {
    let bids: Vec<f64> = (1..=10).map(f64::from).collect();
    let a = aba_averages(&bids, 0.1).unwrap();
    assert!(close(a.a1, 5.5, 1e-15));
    assert!(aba_averages(&bids, 0.5).is_err());
}

fn tender() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(1.0f64..1000.0, 4..50)
}

proptest! {
    #[test]
    fn scale_equivariance(bids in tender(), c in 0.01f64..100.0) {
        let a = compute_screens(&bids).unwrap();
        let scaled: Vec<f64> = bids.iter().map(|b| b * c).collect();
        let b = compute_screens(&scaled).unwrap();
        for (x, y) in [(a.cv, b.cv), (a.spd, b.spd), (a.diffp, b.diffp), (a.rd, b.rd),
                       (a.kurt, b.kurt), (a.skew, b.skew), (a.kstest, b.kstest)] {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{} vs {}", x, y);
        }
        prop_assert!((a.a1 * c - b.a1).abs() <= 1e-10 * b.a1.abs());
        prop_assert!((a.a2 * c - b.a2).abs() <= 1e-10 * b.a2.abs().max(1.0));
    }

    #[test]
    fn translation_keeps_shape_moments(bids in tender(), shift in 0.0f64..500.0) {
        let a = compute_screens(&bids).unwrap();
        let moved: Vec<f64> = bids.iter().map(|b| b + shift).collect();
        let b = compute_screens(&moved).unwrap();
        prop_assert!((a.kurt - b.kurt).abs() <= 1e-8 * a.kurt.abs().max(1.0));
        prop_assert!((a.skew - b.skew).abs() <= 1e-8 * a.skew.abs().max(1.0));
    }

    #[test]
    fn diffp_bounded_by_spd(bids in prop::collection::vec(1.0f64..1000.0, 1..50)) {
        let s = compute_screens(&bids).unwrap();
        prop_assert!(s.diffp <= s.spd);
        prop_assert!(s.spd >= 0.0 && s.diffp >= 0.0);
        prop_assert!((0.0..=1.0).contains(&s.kstest));
    }
}
