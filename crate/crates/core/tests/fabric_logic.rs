// SPDX-License-Identifier: Apache-2.0

use pimasm::bits::Bits;
use pimasm::fabric::{Logic2, SenseConfig, SubArray};
use pimasm::trace::EventKind;
use proptest::prelude::*;

fn loaded(a: &[bool], b: &[bool], c: &[bool]) -> SubArray {
    let mut sa = SubArray::new(32, a.len()).unwrap();
    sa.write_row(0, &Bits::from_bools(a.iter().copied())).unwrap();
    sa.write_row(1, &Bits::from_bools(b.iter().copied())).unwrap();
    sa.write_row(2, &Bits::from_bools(c.iter().copied())).unwrap();
    sa
}

fn rows(n: usize) -> impl Strategy<Value = (Vec<bool>, Vec<bool>, Vec<bool>)> {
    (prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n), prop::collection::vec(any::<bool>(), n))
}

proptest! {
    #[test]
    fn every_column_matches_boolean_logic((a, b, c) in (1usize..300).prop_flat_map(rows)) {
        let mut sa = loaded(&a, &b, &c);
        let out = sa.activate([0, 1, 2], SenseConfig::XOR3).unwrap();
        let (or3, maj, and3, xor3) = (out.or3.unwrap(), out.maj.unwrap(), out.and3.unwrap(), out.xor3.unwrap());
        for i in 0..a.len() {
            let (x, y, z) = (a[i], b[i], c[i]);
            prop_assert_eq!(or3.get(i), x | y | z);
            prop_assert_eq!(maj.get(i), (x & y) | (x & z) | (y & z));
            prop_assert_eq!(and3.get(i), x & y & z);
            prop_assert_eq!(xor3.get(i), x ^ y ^ z);
            prop_assert_eq!(xor3.get(i), (!maj.get(i) & or3.get(i)) | (maj.get(i) & and3.get(i)));
        }
    }

    #[test]
    fn two_input_functions((a, b, _) in (1usize..200).prop_flat_map(rows)) {
        let mut sa = loaded(&a, &b, &a);
        for op in Logic2::ALL {
            let got = sa.activate2(0, 1, op).unwrap();
            for i in 0..a.len() {
                let (x, y) = (a[i], b[i]);
                let want = match op {
                    Logic2::And2 => x & y,
                    Logic2::Nand2 => !(x & y),
                    Logic2::Or2 => x | y,
                    Logic2::Nor2 => !(x | y),
                    Logic2::Xor2 => x ^ y,
                    Logic2::Xnor2 => !(x ^ y),
                };
                prop_assert_eq!(got.get(i), want, "{:?} column {}", op, i);
            }
        }
    }

    #[test]
    fn activation_leaves_cells_untouched((a, b, c) in (1usize..100).prop_flat_map(rows)) {
        let mut sa = loaded(&a, &b, &c);
        let before = sa.dump();
        for cfg in [SenseConfig::AND3, SenseConfig::OR3, SenseConfig::MAJ, SenseConfig::XOR3] {
            sa.activate([0, 1, 2], cfg).unwrap();
        }
        prop_assert_eq!(sa.dump(), before);
    }
}

#[test]
fn one_cycle_per_activation_priced_by_setting() {
    let mut sa = SubArray::new(32, 8).unwrap();
    sa.take_trace();
    sa.activate([0, 1, 2], SenseConfig::AND3).unwrap();
    sa.activate([0, 1, 2], SenseConfig::XOR3).unwrap();
    let t = sa.take_trace();
    assert_eq!(t.total(EventKind::CAnd3), 1);
    assert_eq!(t.total(EventKind::CAdd), 1);
}

#[test]
fn illegal_settings_are_rejected() {
    let mut sa = SubArray::new(32, 8).unwrap();
    for bits in 0..16u8 {
        let cfg = SenseConfig::bits(bits & 8 != 0, bits & 4 != 0, bits & 2 != 0, bits & 1 != 0);
        let r = sa.activate([0, 1, 2], cfg);
        assert_eq!(r.is_ok(), cfg.is_legal() && cfg != SenseConfig::READ, "{cfg:?}");
    }
}
