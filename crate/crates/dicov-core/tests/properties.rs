//! Randomized invariants over the matrix, wire, hub, and summary layers.

use std::io::Cursor;

use dicov_core::experiment::{quantile, summarize};
use dicov_core::hub::{aggregate, final_threshold, hub_variance};
use dicov_core::matrix::{identity_residual, invert_spd, DenseSymMatrix, SparseSymMatrix};
use dicov_core::wire::{decode_update, encode_update, read_message, write_message, Message};
use dicov_core::SparseUpdate;
use proptest::prelude::*;

/// Strict-upper-triangle storage over every (i ≤ j) cell, each present or
/// absent independently; values bounded away from exact zero.
fn arb_sparse(p: usize) -> impl Strategy<Value = SparseSymMatrix> {
    let cells: Vec<(u32, u32)> = (0..p as u32)
        .flat_map(|i| (i..p as u32).map(move |j| (i, j)))
        .collect();
    let count = cells.len();
    proptest::collection::vec(proptest::option::of(prop_oneof![-10.0..-1e-6, 1e-6..10.0]), count)
        .prop_map(move |values| {
            let entries = cells
                .iter()
                .zip(values)
                .filter_map(|(&(i, j), v)| v.map(|v| (i, j, v)))
                .collect();
            SparseSymMatrix::new(p, entries).expect("generated entries are canonical")
        })
}

fn arb_update() -> impl Strategy<Value = SparseUpdate> {
    (1usize..12).prop_flat_map(|p| {
        (arb_sparse(p), any::<u32>(), 1u32..100_000, 0.0f64..1e6).prop_map(
            |(entries, machine_id, n, rho)| {
                let bandwidth_used = entries.count_diag() + 2 * entries.count_offdiag();
                SparseUpdate { machine_id, n, entries, rho, bandwidth_used }
            },
        )
    })
}

/// Diagonally dominant symmetric matrices: always positive definite.
fn arb_spd(p: usize) -> impl Strategy<Value = DenseSymMatrix> {
    let offdiag = p * (p - 1) / 2;
    (
        proptest::collection::vec(1.0f64..3.0, p),
        proptest::collection::vec(-0.1f64..0.1, offdiag),
    )
        .prop_map(move |(diag, off)| {
            let mut m = DenseSymMatrix::from_diag(&diag);
            let mut k = 0;
            for i in 0..p {
                for j in (i + 1)..p {
                    m.set(i, j, off[k]);
                    k += 1;
                }
            }
            m
        })
}

fn entry_bits(m: &SparseSymMatrix) -> Vec<(u32, u32, u64)> {
    m.entries().iter().map(|&(i, j, v)| (i, j, v.to_bits())).collect()
}

proptest! {
    #[test]
    fn wire_round_trip_is_identity(update in arb_update()) {
        let decoded = decode_update(&encode_update(&update)).unwrap();
        prop_assert_eq!(&decoded, &update);
        prop_assert_eq!(entry_bits(&decoded.entries), entry_bits(&update.entries));
    }

    #[test]
    fn message_framing_round_trips(msg in prop_oneof![
        any::<u32>().prop_map(|machine_id| Message::Hello { machine_id }),
        (1u32..5000, 1u32..100_000, 0.0f64..10.0, any::<u64>(), any::<u64>()).prop_map(
            |(p, n, lambda, bandwidth, base_seed)| Message::Config {
                p, n, lambda, bandwidth, base_seed,
            },
        ),
        proptest::collection::vec(any::<u8>(), 0..512).prop_map(Message::Update),
        any::<u8>().prop_map(|status| Message::Ack { status }),
    ]) {
        let mut buf = Vec::new();
        write_message(&mut buf, &msg).unwrap();
        prop_assert_eq!(read_message(&mut Cursor::new(buf)).unwrap(), msg);
    }

    #[test]
    fn sparse_dense_round_trip(sparse in (1usize..10).prop_flat_map(arb_sparse)) {
        let back = SparseSymMatrix::from_dense(&sparse.to_dense());
        prop_assert_eq!(entry_bits(&back), entry_bits(&sparse));
    }

    #[test]
    fn inversion_is_an_involution(a in (1usize..9).prop_flat_map(arb_spd)) {
        let inv = invert_spd(&a).unwrap();
        prop_assert!(identity_residual(&a, &inv) <= 1e-8);
        let back = invert_spd(&inv).unwrap();
        prop_assert!(a.max_abs_diff(&back).unwrap() <= 1e-6);
    }

    #[test]
    fn aggregate_ignores_update_order(
        sparses in (2usize..8).prop_flat_map(|p| {
            proptest::collection::vec(arb_sparse(p), 2..6)
        }),
        rotation in 0usize..6,
    ) {
        let updates: Vec<SparseUpdate> = sparses
            .into_iter()
            .enumerate()
            .map(|(m, entries)| {
                let bandwidth_used = entries.count_diag() + 2 * entries.count_offdiag();
                SparseUpdate { machine_id: m as u32, n: 100, entries, rho: 0.0, bandwidth_used }
            })
            .collect();
        let reference = aggregate(&updates).unwrap();
        let mut rotated = updates;
        let by = rotation % rotated.len();
        rotated.rotate_left(by);
        let permuted = aggregate(&rotated).unwrap();
        prop_assert!(reference.max_abs_diff(&permuted).unwrap() <= 1e-12);
    }

    #[test]
    fn final_threshold_is_idempotent(
        theta_bar in (2usize..8).prop_flat_map(arb_spd),
        tau in 0.0f64..3.0,
    ) {
        let sigma_m = hub_variance(&theta_bar).unwrap();
        let once = final_threshold(&theta_bar, &sigma_m, tau, 4).unwrap();
        let twice = final_threshold(&once.theta_final.to_dense(), &sigma_m, tau, 4).unwrap();
        prop_assert_eq!(entry_bits(&twice.theta_final), entry_bits(&once.theta_final));
    }

    #[test]
    fn final_threshold_support_shrinks_with_tau(
        theta_bar in (2usize..8).prop_flat_map(arb_spd),
        tau in 0.0f64..2.0,
        bump in 0.0f64..2.0,
    ) {
        let sigma_m = hub_variance(&theta_bar).unwrap();
        let loose = final_threshold(&theta_bar, &sigma_m, tau, 4).unwrap();
        let tight = final_threshold(&theta_bar, &sigma_m, tau + bump, 4).unwrap();
        prop_assert!(tight.theta_final.len() <= loose.theta_final.len());
        for (i, j, v) in tight.theta_final.entries() {
            prop_assert_eq!(loose.theta_final.get(*i as usize, *j as usize), *v);
        }
    }

    #[test]
    fn quantile_summary_is_ordered_and_bounded(
        values in proptest::collection::vec(-1e6f64..1e6, 1..40),
    ) {
        let s = summarize(&values);
        let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(s.q1 <= s.median && s.median <= s.q3);
        // Interpolation may land an ulp past the extremes.
        prop_assert!(lo <= s.q1 && s.q3 <= hi + hi.abs() * 1e-12 + 1e-12);
        let mut sorted = values;
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        prop_assert_eq!(quantile(&sorted, 0.0), lo);
        prop_assert_eq!(quantile(&sorted, 1.0), hi);
    }
}
