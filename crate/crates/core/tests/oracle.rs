//! The analysis operator and its synthesis against dense linear-algebra
//! references.

mod common;

use common::*;
use depool_core::depool::*;
use depool_core::Field;
use nalgebra::DVector;

#[test]
fn synthesis_matches_pseudo_inverse_on_squares() {
    // the full 4..=32 sweep runs in the acceptance suite
    for n in [4, 6, 10, 16, 24] {
        let (diff, gap) = check_against_pinv(n, n, n as u64);
        assert!(diff <= 1e-8, "{n}x{n}: componentwise {diff:e}");
        assert!(gap <= 1e-10, "{n}x{n}: residual gap {gap:e}");
    }
}

#[test]
fn synthesis_matches_pseudo_inverse_on_rectangles() {
    for (h, w) in [(4, 6), (6, 10), (12, 4), (8, 30), (32, 14), (20, 22)] {
        let (diff, gap) = check_against_pinv(h, w, (h * 100 + w) as u64);
        assert!(diff <= 1e-8, "{h}x{w}: componentwise {diff:e}");
        assert!(gap <= 1e-10, "{h}x{w}: residual gap {gap:e}");
    }
}

#[test]
fn four_by_four_operator_is_rank_deficient() {
    // rank 2mn + m + n out of 4mn: roughly half of every image is invisible
    for (h, w) in [(4, 4), (8, 8), (8, 12), (16, 16)] {
        let a = build_operator_matrix(h, w, &KernelBank::depool4()).unwrap();
        let (m, n) = (h / 2, w / 2);
        assert_eq!(numeric_rank(&a), 2 * m * n + m + n, "{h}x{w}");
    }
    let haar = build_operator_matrix(8, 8, &KernelBank::haar2()).unwrap();
    assert_eq!(numeric_rank(&haar), 64);
}

#[test]
fn haar_gram_is_4i_and_round_trip_exact() {
    let bank = KernelBank::haar2();
    let a = build_operator_matrix(16, 16, &bank).unwrap();
    let gram = &a * a.transpose();
    assert_eq!(gram, nalgebra::DMatrix::identity(256, 256) * 4.0);
    let x = random_field(16, 16, 5);
    let r = depool_inverse(&depool_forward(&x, &bank).unwrap(), &bank).unwrap();
    assert!(r.max_abs_diff(&x).unwrap() <= 1e-12);
}

#[test]
fn adjoint_equals_matrix_transpose() {
    let bank = KernelBank::depool4();
    let a = build_operator_matrix(16, 16, &bank).unwrap();
    for seed in 0..5 {
        let y = random_signed(256, 40 + seed);
        let set = SubbandSet::from_flat(&y, (16, 16)).unwrap();
        let fast = depool_adjoint(&set, &bank).unwrap();
        let slow = a.transpose() * DVector::from_column_slice(&y);
        for (p, q) in fast.data().iter().zip(slow.iter()) {
            assert!((p - q).abs() <= 1e-12);
        }
    }
}

#[test]
fn forward_matches_direct_correlation() {
    for bank in [KernelBank::depool4(), KernelBank::haar2()] {
        let mut impulse = Field::zeros(16, 16);
        impulse.set(5, 9, 1.0);
        for x in [impulse, random_field(16, 16, 3), random_field(10, 14, 4)] {
            let s = depool_forward(&x, &bank).unwrap();
            for band in Subband::ALL {
                // summation order differs from the oracle's
                let gap = s.band(band).max_abs_diff(&correlate_oracle(&x, &bank, band)).unwrap();
                assert!(gap < 1e-13, "{band:?}: {gap:e}");
            }
        }
    }
}

#[test]
fn impulse_reads_kernel_taps() {
    // the window with origin (4, 8) on the padded grid covers the impulse at
    // padded (6, 10), i.e. tap (2, 2)
    let bank = KernelBank::depool4();
    let mut x = Field::zeros(16, 16);
    x.set(5, 9, 1.0);
    let s = depool_forward(&x, &bank).unwrap();
    for band in Subband::ALL {
        assert_eq!(s.band(band).get(2, 4), bank.kernel(band)[2 * 4 + 2]);
        assert_eq!(s.band(band).get(3, 5), bank.kernel(band)[0]);
    }
}

/// RMS of `x - A⁺Ax` for a seeded uniform image, frozen from the dense
/// pseudo-inverse. The lost component is the part of the image the 4x4 bank
/// cannot see.
const GOLDEN_ROUND_TRIP_RMS: [(usize, f64); 4] =
    [(8, 3.056247889611913e-1), (16, 2.278187465189198e-1), (24, 2.292635433471188e-1), (32, 2.222611504469119e-1)];

#[test]
fn round_trip_loss_matches_golden() {
    let bank = KernelBank::depool4();
    for (n, golden) in GOLDEN_ROUND_TRIP_RMS {
        let x = random_field(n, n, 1000 + n as u64);
        let r = depool_inverse(&depool_forward(&x, &bank).unwrap(), &bank).unwrap();
        let rms = (x.data().iter().zip(r.data()).map(|(p, q)| (p - q).powi(2)).sum::<f64>() / (n * n) as f64).sqrt();
        assert!((rms - golden).abs() <= 1e-10, "{n}x{n}: {rms:e} vs {golden:e}");
        // the reconstruction reproduces the subbands exactly
        let again = depool_forward(&r, &bank).unwrap();
        let s = depool_forward(&x, &bank).unwrap();
        let gap = again.flatten().iter().zip(s.flatten()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(gap < 1e-10);
    }
}
