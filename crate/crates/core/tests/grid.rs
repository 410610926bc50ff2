use mixbound::grid::{self, block_schedule, divisor_chain, lattice_members, DivisorChain};
use mixbound::mixing::MixingProfile;
use mixbound::Error;
use proptest::prelude::*;

#[test]
fn lattice_examples() {
    assert_eq!(lattice_members(2, 40).unwrap(), vec![6, 12, 18, 24, 36]);
    assert!(lattice_members(3, 30).unwrap().contains(&30));
    assert_eq!(lattice_members(2, 6).unwrap(), vec![6]);
}

#[test]
fn divisor_examples() {
    assert_eq!(divisor_chain(12).unwrap().divisors, vec![1, 2, 3, 4, 6, 12]);
    assert_eq!(divisor_chain(6).unwrap().divisors, vec![1, 2, 3, 6]);
    let c = divisor_chain(36).unwrap();
    assert_eq!(c.divisors, vec![1, 2, 3, 4, 6, 9, 12, 18, 36]);
    assert!(c.gap_ok());
}

#[test]
fn off_lattice_sizes_are_rejected_with_the_nearest_member() {
    match divisor_chain(100) {
        Err(Error::NotInLattice { n, nearest }) => assert_eq!((n, nearest), (100, 96)),
        other => panic!("{other:?}"),
    }
    assert!(block_schedule(14, &MixingProfile::Iid).is_err());
    // 7 is outside the prime basis; 10 has the divisor gap 2 -> 5.
    assert!(!grid::is_admissible(42));
    assert!(!DivisorChain::new(10).gap_ok());
}

#[test]
fn schedule_examples() {
    let s = block_schedule(12, &MixingProfile::polynomial(1.0).unwrap()).unwrap();
    assert_eq!(s.q_seq[0], 2);
    let s = block_schedule(1536, &MixingProfile::Iid).unwrap();
    assert!(s.q_seq.iter().all(|q| *q == 1));
}

fn profiles() -> Vec<MixingProfile> {
    vec![
        MixingProfile::Iid,
        MixingProfile::m_dependent(5).unwrap(),
        MixingProfile::polynomial(0.5).unwrap(),
        MixingProfile::polynomial(2.0).unwrap(),
        MixingProfile::exponential(0.9).unwrap(),
    ]
}

proptest! {
    #[test]
    fn schedules_are_non_increasing_divisors(idx in 0usize..351, which in 0usize..5) {
        let members = lattice_members(3, 1_000_000).unwrap();
        let n = members[idx % members.len()];
        let p = &profiles()[which];
        let s = block_schedule(n, p).unwrap();
        prop_assert!(s.q_seq.windows(2).all(|w| w[1] <= w[0]));
        prop_assert!(s.q_seq.iter().all(|q| n % q == 0));
        prop_assert_eq!(*s.q_seq.last().unwrap(), 1);
        // Each entry is the smallest divisor satisfying its balance.
        let chain = DivisorChain::new(n);
        for (k, q) in s.q_seq.iter().enumerate() {
            prop_assert!(grid::balances(p, n, *q, k));
            if let Some(prev) = chain.divisors.iter().take_while(|d| *d < q).last() {
                prop_assert!(!grid::balances(p, n, *prev, k));
            }
        }
    }

    #[test]
    fn m_dependent_first_block_closed_form(idx in 0usize..351, m in 1u64..5000) {
        let members = lattice_members(3, 1_000_000).unwrap();
        let n = members[idx % members.len()];
        let s = block_schedule(n, &MixingProfile::m_dependent(m).unwrap()).unwrap();
        let target = (m as f64).min(n as f64 / 4.0);
        prop_assert_eq!(s.q_seq[0], DivisorChain::new(n).ceil(target));
    }
}
