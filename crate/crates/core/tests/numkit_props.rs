use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use ssagcn_core::numkit::{grad_check, softmax_rows, CsrMatrix, Matrix, Tape, Var};
use ssagcn_core::Result;

fn dense(rows: usize, cols: usize, vals: &[f64]) -> Matrix<f64> {
    Matrix::from_fn(rows, cols, |i, j| vals[(i * cols + j) % vals.len()])
}

/// Naive triple loop, independent of the gemm path.
fn naive_matmul(a: &Matrix<f64>, b: &Matrix<f64>) -> Matrix<f64> {
    Matrix::from_fn(a.rows(), b.cols(), |i, j| {
        (0..a.cols()).map(|k| a.get(i, k) * b.get(k, j)).sum()
    })
}

fn sparse_strategy(max: usize) -> impl Strategy<Value = (usize, usize, Vec<(usize, usize, f64)>)> {
    (1..=max, 1..=max).prop_flat_map(|(r, c)| {
        let entry = (0..r, 0..c, -3.0f64..3.0).prop_filter("no explicit zero", |e| e.2 != 0.0);
        (Just(r), Just(c), prop::collection::vec(entry, 0..(r * c).min(64)))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spmm_matches_dense_oracle(
        (r, c, trips) in sparse_strategy(32),
        k in 1usize..8,
        vals in prop::collection::vec(-2.0f64..2.0, 1..64),
    ) {
        // Duplicates are summed by from_triplets; mirror that in the oracle.
        let s = CsrMatrix::from_triplets(r, c, &trips).unwrap();
        let mut oracle = Matrix::<f64>::zeros(r, c);
        for &(i, j, v) in &trips {
            oracle.set(i, j, oracle.get(i, j) + v);
        }
        let d = dense(c, k, &vals);
        let got = s.spmm(&d).unwrap();
        let want = naive_matmul(&oracle, &d);
        prop_assert!(got.max_abs_diff(&want).unwrap() <= 1e-12);
    }

    #[test]
    fn softmax_rows_are_distributions(
        rows in 1usize..6,
        cols in 1usize..9,
        vals in prop::collection::vec(-30.0f64..30.0, 1..54),
    ) {
        let s = softmax_rows(&dense(rows, cols, &vals));
        for i in 0..rows {
            let row = s.row(i);
            prop_assert!(row.iter().all(|&p| (0.0..=1.0).contains(&p)));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        }
    }

    #[test]
    fn matmul_matches_naive(
        m in 1usize..7, k in 1usize..7, n in 1usize..7,
        vals in prop::collection::vec(-2.0f64..2.0, 1..49),
    ) {
        let a = dense(m, k, &vals);
        let b = dense(k, n, &vals[vals.len() / 2..].iter().chain(&vals).copied().collect::<Vec<_>>());
        prop_assert!(a.matmul(&b).unwrap().max_abs_diff(&naive_matmul(&a, &b)).unwrap() <= 1e-12);
    }
}

#[test]
fn identity_and_hand_products() {
    let m = Matrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]).unwrap();
    assert_eq!(Matrix::<f64>::identity(2).matmul(&m).unwrap(), m);
    let a = Matrix::<f64>::from_rows(&[&[1.0, 2.0]]).unwrap();
    let b = Matrix::from_rows(&[&[3.0], &[4.0]]).unwrap();
    assert_eq!(a.matmul(&b).unwrap().get(0, 0), 11.0);
}

#[test]
fn dropout_preserves_expectation() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Matrix::filled(1, 100_000, 1.5));
    let y = tape.dropout(x, 0.2, true, &mut rng).unwrap();
    let mean = tape.value(y).sum() / 100_000.0;
    assert!((mean - 1.5).abs() / 1.5 < 0.02, "mean {mean}");
    let zeros = tape.value(y).as_slice().iter().filter(|&&v| v == 0.0).count();
    assert!((zeros as f64 / 1e5 - 0.2).abs() < 0.01);
}

#[test]
fn dropout_rate_one_is_config_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut tape = Tape::<f64>::new();
    let x = tape.leaf(Matrix::filled(2, 2, 1.0));
    assert!(matches!(
        tape.dropout(x, 1.0, true, &mut rng),
        Err(ssagcn_core::Error::Config(_))
    ));
}

fn point(rows: usize, cols: usize, seed: u64) -> Matrix<f64> {
    use rand::Rng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0))
}

/// Weighted sum so that every output entry matters to the scalar.
fn weighted_sum(tape: &mut Tape<f64>, v: Var, seed: u64) -> Result<Var> {
    let (r, c) = tape.value(v).shape();
    let w = tape.constant(point(r, c, seed));
    let p = tape.mul(v, w)?;
    Ok(tape.sum(p))
}

fn assert_grad<F>(name: &str, f: F, x: &Matrix<f64>)
where
    F: Fn(&mut Tape<f64>, Var) -> Result<Var>,
{
    let err = grad_check(f, x, 1e-6).unwrap();
    assert!(err < 1e-4, "{name}: relative error {err:e}");
}

#[test]
fn every_op_passes_gradient_check() {
    let x = point(4, 3, 1);
    let b = point(3, 5, 2);
    let bt = point(5, 3, 3);
    let adj = std::sync::Arc::new(
        CsrMatrix::from_triplets(4, 4, &[(0, 0, 0.5), (0, 2, 0.3), (1, 1, 1.0), (2, 0, 0.3), (3, 1, -0.7)])
            .unwrap(),
    );

    assert_grad("matmul left", |t, v| { let c = t.constant(b.clone()); let y = t.matmul(v, c)?; weighted_sum(t, y, 9) }, &x);
    assert_grad("matmul right", |t, v| { let c = t.constant(x.clone()); let y = t.matmul(c, v)?; weighted_sum(t, y, 9) }, &b);
    assert_grad("matmul_nt", |t, v| { let c = t.constant(bt.clone()); let y = t.matmul_nt(v, c)?; weighted_sum(t, y, 9) }, &x);
    assert_grad("matmul_nt right", |t, v| { let c = t.constant(x.clone()); let y = t.matmul_nt(c, v)?; weighted_sum(t, y, 9) }, &bt);
    assert_grad("spmm", |t, v| { let y = t.spmm(&adj, v)?; weighted_sum(t, y, 9) }, &x);
    assert_grad("add", |t, v| { let c = t.constant(point(4, 3, 5)); let y = t.add(v, c)?; weighted_sum(t, y, 9) }, &x);
    assert_grad("mul", |t, v| { let y = t.mul(v, v)?; weighted_sum(t, y, 9) }, &x);
    assert_grad("scale", |t, v| { let y = t.scale(v, -2.5); weighted_sum(t, y, 9) }, &x);
    // Keep FD away from the kink.
    let shifted = x.map(|v| if v.abs() < 0.05 { v + 0.2 } else { v });
    assert_grad("relu", |t, v| { let y = t.relu(v); weighted_sum(t, y, 9) }, &shifted);
    assert_grad("softmax_rows", |t, v| { let y = t.softmax_rows(v); weighted_sum(t, y, 9) }, &x);
    assert_grad("concat_cols", |t, v| {
        let c = t.constant(point(4, 2, 6));
        let y = t.concat_cols(&[c, v, v])?;
        weighted_sum(t, y, 9)
    }, &x);
    assert_grad("nll_loss", |t, v| t.nll_loss(v, &[0, 2, 1, 2], &[0, 1, 3]), &x);
    assert_grad("dropout (fixed mask)", |t, v| {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = t.dropout(v, 0.3, true, &mut rng)?;
        weighted_sum(t, y, 9)
    }, &x);
}

#[test]
fn spec_gradient_examples() {
    let sq = |t: &mut Tape<f64>, v: Var| -> Result<Var> { let y = t.mul(v, v)?; Ok(t.sum(y)) };
    let x = Matrix::filled(1, 1, 3.0);
    let fd = ssagcn_core::numkit::finite_difference(&sq, &x, 1e-3).unwrap();
    assert!((fd.get(0, 0) - 6.0).abs() < 1e-6);
    assert_eq!(ssagcn_core::numkit::analytic_gradient(&sq, &x).unwrap().get(0, 0), 6.0);

    let dead = |t: &mut Tape<f64>, v: Var| -> Result<Var> { let y = t.relu(v); Ok(t.sum(y)) };
    let g = ssagcn_core::numkit::analytic_gradient(&dead, &Matrix::filled(1, 1, -2.0)).unwrap();
    assert_eq!(g.get(0, 0), 0.0);
}

#[test]
fn nll_examples() {
    let mut tape = Tape::<f64>::new();
    let z = tape.leaf(Matrix::zeros(1, 7));
    let l = tape.nll_loss(z, &[3], &[0]).unwrap();
    assert!((tape.value(l).get(0, 0) - 7f64.ln()).abs() < 1e-12);
    assert!((tape.value(l).get(0, 0) - 1.94591).abs() < 1e-5);
}
