use conormal::cellcx::CellularMap;
use conormal::gen::{self, case_rng, Limits};
use conormal::io::{load_str, Instance};
use conormal::mueu::{external_cycle, mueu, star};
use conormal::qlinalg::{q, RationalMatrix, Q};
use conormal::CellularSheaf;
use proptest::prelude::*;

/// Plain dense Gauss-Jordan elimination, the textbook way.
fn naive_rank(mut a: Vec<Vec<Q>>) -> usize {
    let rows = a.len();
    let cols = a.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for c in 0..cols {
        let Some(p) = (rank..rows).find(|&r| a[r][c] != q(0)) else {
            continue;
        };
        a.swap(rank, p);
        let pivot_row = a[rank].clone();
        for (r, row) in a.iter_mut().enumerate() {
            if r != rank && row[c] != q(0) {
                let f = row[c].clone() / pivot_row[c].clone();
                for (x, p) in row.iter_mut().zip(&pivot_row) {
                    *x -= p.clone() * f.clone();
                }
            }
        }
        rank += 1;
    }
    rank
}

fn dense(entries: &[i64], rows: usize, cols: usize, den: &[i64]) -> Vec<Vec<Q>> {
    (0..rows)
        .map(|i| {
            (0..cols)
                .map(|j| {
                    let k = i * cols + j;
                    Q::new(entries[k].into(), den[k].into())
                })
                .collect()
        })
        .collect()
}

fn matrix_strategy() -> impl Strategy<Value = (usize, usize, Vec<i64>, Vec<i64>)> {
    (1usize..=12, 1usize..=12).prop_flat_map(|(r, c)| {
        // many zeros, so low ranks show up often
        let entry = prop_oneof![3 => Just(0i64), 2 => -4i64..=4];
        (
            Just(r),
            Just(c),
            proptest::collection::vec(entry, r * c),
            proptest::collection::vec(1i64..=3, r * c),
        )
    })
}

fn sheaf_from_seed(seed: u64, limits: Limits) -> CellularSheaf {
    let mut rng = case_rng(seed, "properties", 0);
    let x = gen::random_complex(&mut rng, limits);
    gen::random_sheaf(&mut rng, &x)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rank_matches_naive_elimination((r, c, e, d) in matrix_strategy()) {
        let a = dense(&e, r, c, &d);
        let m = RationalMatrix::from_dense(r, c, &a);
        prop_assert_eq!(m.rank(), naive_rank(a.clone()));
        prop_assert_eq!(m.transpose().rank(), m.rank());
    }

    #[test]
    fn nullspace_is_a_kernel_basis((r, c, e, d) in matrix_strategy()) {
        let m = RationalMatrix::from_dense(r, c, &dense(&e, r, c, &d));
        let basis = m.nullspace();
        prop_assert_eq!(basis.len(), c - m.rank());
        for v in &basis {
            prop_assert!(m.mul_vec(v).iter().all(|x| *x == q(0)));
        }
        if !basis.is_empty() {
            prop_assert_eq!(RationalMatrix::from_columns(c, &basis).rank(), basis.len());
        }
    }

    #[test]
    fn solve_returns_a_solution((r, c, e, d) in matrix_strategy(), pick in 0usize..12) {
        let m = RationalMatrix::from_dense(r, c, &dense(&e, r, c, &d));
        // a right-hand side in the column space is always solvable
        let rhs = RationalMatrix::from_columns(r, &[m.column(pick % c)]);
        let x = m.solve(&rhs).expect("consistent system");
        prop_assert_eq!(m.mul(&x), rhs);
    }

    #[test]
    fn euler_equals_alternating_homology(seed in any::<u64>()) {
        let v = gen::random_vect_complex(&mut case_rng(seed, "vect", 0));
        let alt: i64 = v.betti().iter().map(|(n, b)| if n % 2 == 0 { *b as i64 } else { -(*b as i64) }).sum();
        prop_assert_eq!(v.euler(), alt);
        prop_assert_eq!(v.shift(1).euler(), -v.euler());
        prop_assert_eq!(v.dual().betti().values().sum::<usize>(), v.betti().values().sum::<usize>());
    }

    #[test]
    fn global_sections_euler_is_cellwise(seed in any::<u64>()) {
        let f = sheaf_from_seed(seed, Limits::new(3, 30));
        let total = f.global_sections().unwrap();
        prop_assert_eq!(total.euler(), f.stalk_sum_euler());
        prop_assert_eq!(f.shift(1).euler_char().unwrap(), -f.euler_char().unwrap());
    }

    #[test]
    fn cycle_is_additive_on_direct_sums(a in any::<u64>(), b in any::<u64>()) {
        let mut rng = case_rng(a, "sum", 0);
        let x = gen::random_complex(&mut rng, Limits::new(3, 25));
        let f = gen::random_sheaf(&mut rng, &x);
        let g = gen::random_sheaf(&mut case_rng(b, "sum", 1), &x);
        let sum = mueu(&f.direct_sum(&g).unwrap());
        prop_assert_eq!(sum, mueu(&f).add(&mueu(&g)).unwrap());
    }

    #[test]
    fn cycle_algebra_laws(a in any::<u64>()) {
        let mut rng = case_rng(a, "laws", 0);
        let x = gen::random_complex(&mut rng, Limits::new(2, 15));
        let y = gen::random_complex(&mut rng, Limits::new(2, 15));
        let (l, m) = (gen::random_cycle(&mut rng, &x), gen::random_cycle(&mut rng, &x));
        let n = gen::random_cycle(&mut rng, &y);
        prop_assert_eq!(star(&l, &m).unwrap(), star(&m, &l).unwrap());
        prop_assert_eq!(external_cycle(&l, &n).degree(), l.degree() * n.degree());
    }

    #[test]
    fn identity_direct_image_is_identity(seed in any::<u64>()) {
        let f = sheaf_from_seed(seed, Limits::new(3, 25));
        let id = CellularMap::identity(f.base());
        prop_assert_eq!(CellularSheaf::pushforward(&id, &f).unwrap(), f);
    }

    #[test]
    fn instance_files_round_trip(seed in any::<u64>()) {
        let f = sheaf_from_seed(seed, Limits::new(3, 25));
        let mut inst = Instance::default();
        inst.sheaves.insert("F".into(), f.clone());
        let text = inst.to_json();
        let back = load_str(&text).unwrap();
        let g = &back.sheaves["F"];
        prop_assert_eq!(g, &f);
        prop_assert_eq!(mueu(g), mueu(&f));
        // serializing again gives the same text
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn naive_rank_oracle_sanity() {
    let a = dense(&[1, 2, 2, 4], 2, 2, &[1, 1, 1, 1]);
    assert_eq!(naive_rank(a), 1);
    let i = RationalMatrix::identity(5);
    assert_eq!(naive_rank(i.to_dense()), 5);
}
