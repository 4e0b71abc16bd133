use super::ops::{block_tt_extract, block_tt_row, block_tt_row_n, power_radius};
use super::*;
use crate::dense::DenseTensor;
use crate::linalg;
use crate::paired::PairedTensor;
use crate::shape::{Factorization, Shape};
use approx::assert_abs_diff_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_dense(sizes: &[usize], seed: u64) -> DenseTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseTensor::from_fn(Shape::new(sizes.to_vec()).unwrap(), |_| {
        rng.gen_range(-1.0..1.0)
    })
}

fn random_paired(rows: &[usize], cols: &[usize], seed: u64) -> PairedTensor {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    PairedTensor::from_fn(
        Shape::new(rows.to_vec()).unwrap(),
        Shape::new(cols.to_vec()).unwrap(),
        |_, _| rng.gen_range(-1.0..1.0),
    )
    .unwrap()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

#[test]
fn decompose_reconstruct_roundtrip() {
    let x = random_dense(&[3, 4, 2, 5], 11);
    let exact = TensorTrain::decompose(&x, 0.0, None).unwrap();
    let back = exact.reconstruct().unwrap();
    assert!(max_abs_diff(x.data(), back.data()) < 1e-12);
    let ranks = exact.ranks();
    assert_eq!(ranks[0], 1);
    assert_eq!(*ranks.last().unwrap(), 1);
    assert!(ranks[1] <= 3 && ranks[2] <= 10 && ranks[3] <= 5);

    let coarse = TensorTrain::decompose(&x, 0.3, None).unwrap();
    let mut back = coarse.reconstruct().unwrap();
    back.scale(-1.0);
    let err = x.add(&back).unwrap().frobenius_norm();
    assert!(err <= 0.3 * x.frobenius_norm() + 1e-12);
    assert!(coarse.entry_count() <= exact.entry_count());

    let capped = TensorTrain::decompose(&x, 0.0, Some(2)).unwrap();
    assert!(capped.ranks().iter().all(|&r| r <= 2));
}

#[test]
fn paired_decompose_matches_entries() {
    let x = random_paired(&[2, 3], &[3, 2], 5);
    let t = PairedTensorTrain::decompose(&x, 0.0, None).unwrap();
    let back = t.reconstruct().unwrap();
    assert!(max_abs_diff(x.data(), back.data()) < 1e-12);
    assert_eq!(t.row_shape(), *x.row_shape());
    assert_eq!(t.col_shape(), *x.col_shape());
}

#[test]
fn sum_ranks_add_and_values_add() {
    let a = PairedTensorTrain::random(
        &Shape::new(vec![2, 3]).unwrap(),
        &Shape::new(vec![3, 2]).unwrap(),
        &[2],
        1,
    )
    .unwrap();
    let b = PairedTensorTrain::random(
        &Shape::new(vec![2, 3]).unwrap(),
        &Shape::new(vec![3, 2]).unwrap(),
        &[3],
        2,
    )
    .unwrap();
    let sum = a.add(&b).unwrap();
    assert_eq!(sum.ranks(), vec![1, 5, 1]);
    let oracle = a
        .reconstruct()
        .unwrap()
        .add(&b.reconstruct().unwrap())
        .unwrap();
    assert!(max_abs_diff(sum.reconstruct().unwrap().data(), oracle.data()) < 1e-12);
}

#[test]
fn contraction_ranks_multiply_and_match_dense() {
    let a = PairedTensorTrain::random(
        &Shape::new(vec![2, 3]).unwrap(),
        &Shape::new(vec![3, 2]).unwrap(),
        &[2],
        3,
    )
    .unwrap();
    let b = PairedTensorTrain::random(
        &Shape::new(vec![3, 2]).unwrap(),
        &Shape::new(vec![2, 4]).unwrap(),
        &[3],
        4,
    )
    .unwrap();
    let prod = a.einstein(&b).unwrap();
    assert_eq!(prod.ranks(), vec![1, 6, 1]);
    let oracle = a
        .reconstruct()
        .unwrap()
        .einstein_product(&b.reconstruct().unwrap())
        .unwrap();
    assert!(max_abs_diff(prod.reconstruct().unwrap().data(), oracle.data()) < 1e-12);
}

#[test]
fn transpose_matches_dense_transpose() {
    let a = PairedTensorTrain::random(
        &Shape::new(vec![2, 3, 2]).unwrap(),
        &Shape::new(vec![3, 2, 2]).unwrap(),
        &[2, 3],
        7,
    )
    .unwrap();
    let t = a.transpose();
    assert_eq!(t.ranks(), a.ranks());
    let oracle = a.reconstruct().unwrap().u_transpose();
    assert!(max_abs_diff(t.reconstruct().unwrap().data(), oracle.data()) < 1e-12);
}

#[test]
fn orthonormal_sweeps_preserve_tensor() {
    let shape = Shape::new(vec![3, 2, 4, 2]).unwrap();
    let t = TensorTrain::random(&shape, &[3, 5, 4], 9).unwrap();
    let reference = t.reconstruct().unwrap();

    let mut left = t.clone();
    left.left_orthonormalize().unwrap();
    assert!(max_abs_diff(left.reconstruct().unwrap().data(), reference.data()) < 1e-10);
    for core in &left.cores()[..left.order() - 1] {
        let m = left_unfold(core);
        let gram = m.t().dot(&m);
        for r in 0..gram.nrows() {
            for c in 0..gram.ncols() {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[[r, c]], expect, epsilon = 1e-10);
            }
        }
    }

    let mut right = t.clone();
    right.right_orthonormalize().unwrap();
    assert!(max_abs_diff(right.reconstruct().unwrap().data(), reference.data()) < 1e-10);
    for core in &right.cores()[1..] {
        let m = right_unfold(core);
        let gram = m.dot(&m.t());
        for r in 0..gram.nrows() {
            for c in 0..gram.ncols() {
                let expect = if r == c { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(gram[[r, c]], expect, epsilon = 1e-10);
            }
        }
    }

    let norm = t.norm().unwrap();
    assert_abs_diff_eq!(norm, reference.frobenius_norm(), epsilon = 1e-10);
    assert_abs_diff_eq!(t.dot(&t).unwrap(), norm * norm, epsilon = 1e-8);
}

#[test]
fn rounding_restores_doubled_ranks() {
    let x = random_dense(&[2, 3, 4], 21);
    let t = TensorTrain::decompose(&x, 0.0, None).unwrap();
    let mut s = t.add(&t).unwrap();
    let interior = |r: &[usize]| r[1..r.len() - 1].to_vec();
    let doubled_ranks: Vec<usize> = interior(&t.ranks()).iter().map(|r| 2 * r).collect();
    assert_eq!(interior(&s.ranks()), doubled_ranks);
    s.round(1e-12, None).unwrap();
    assert_eq!(s.ranks(), t.ranks());
    let back = s.reconstruct().unwrap();
    let doubled: Vec<f64> = x.data().iter().map(|v| 2.0 * v).collect();
    assert!(max_abs_diff(back.data(), &doubled) < 1e-10);
}

#[test]
fn interleaved_split_matches_interleaved_dense() {
    let x = random_paired(&[2, 3], &[3, 2], 31);
    let t = PairedTensorTrain::decompose(&x, 0.0, None).unwrap();
    let tt = t.to_interleaved_tt(0.0).unwrap();
    assert_eq!(tt.order(), 4);
    assert_eq!(tt.mode_sizes(), vec![2, 3, 3, 2]);
    let back = tt.reconstruct().unwrap();
    assert!(max_abs_diff(back.data(), x.data()) < 1e-12);
}

#[test]
fn mode_sort_matches_permuted_dense() {
    for (rows, cols, seed) in [
        (vec![2usize, 3], vec![3usize, 2], 41u64),
        (vec![2, 2, 3], vec![2, 3, 2], 42),
    ] {
        let x = random_paired(&rows, &cols, seed);
        let t = PairedTensorTrain::decompose(&x, 0.0, None).unwrap();
        let np = tt_to_nptt(&t.to_interleaved_tt(0.0).unwrap(), rows.len(), 0.0, None).unwrap();
        let mut sorted_sizes = rows.clone();
        sorted_sizes.extend_from_slice(&cols);
        assert_eq!(np.mode_sizes(), sorted_sizes);
        let n = rows.len();
        let oracle = DenseTensor::from_fn(Shape::new(sorted_sizes).unwrap(), |idx| {
            x.get(&idx[..n], &idx[n..])
        });
        let back = np.reconstruct().unwrap();
        assert!(max_abs_diff(back.data(), oracle.data()) < 1e-10);
    }
}

#[test]
fn tsvd_matches_unfolding_svd() {
    let x = random_paired(&[2, 3, 2], &[2, 2, 3], 51);
    let t = PairedTensorTrain::decompose(&x, 0.0, None).unwrap();
    let psi = x.psi_unfold();
    let (_, s_ref, _) = linalg::svd_econ(&psi).unwrap();

    let triples = etsvd(&t, 1e-13, None).unwrap();
    assert_eq!(triples.len(), s_ref.len());
    for (tr, &s) in triples.iter().zip(s_ref.iter()) {
        assert_abs_diff_eq!(tr.sigma, s, epsilon = 1e-10 * s_ref[0]);
        assert_abs_diff_eq!(tr.left.norm().unwrap(), 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(tr.right.norm().unwrap(), 1.0, epsilon = 1e-10);
    }

    let mut recon = Array2::<f64>::zeros(psi.dim());
    for tr in &triples {
        let u = tr.left.reconstruct().unwrap();
        let v = tr.right.reconstruct().unwrap();
        for (c, &vv) in v.data().iter().enumerate() {
            for (r, &uu) in u.data().iter().enumerate() {
                recon[[r, c]] += tr.sigma * uu * vv;
            }
        }
    }
    let err = (&recon - &psi).iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err < 1e-9 * s_ref[0], "reconstruction error {}", err);

    let f = etsvd_factors(&t, 1e-13, None).unwrap();
    assert_eq!(f.sigmas.len(), triples.len());
    let gram = f.left.t().dot(&f.left);
    for r in 0..gram.nrows() {
        for c in 0..gram.ncols() {
            let expect = if r == c { 1.0 } else { 0.0 };
            assert_abs_diff_eq!(gram[[r, c]], expect, epsilon = 1e-9);
        }
    }
    for (k, tr) in triples.iter().enumerate() {
        let u = tr.left.reconstruct().unwrap();
        let v = tr.right.reconstruct().unwrap();
        assert!(max_abs_diff(u.data(), f.left.column(k).as_slice().unwrap()) < 1e-9);
        assert!(max_abs_diff(v.data(), f.right.column(k).to_owned().as_slice().unwrap()) < 1e-9);
    }
}

#[test]
fn tsvd_truncation_and_cap() {
    let x = random_paired(&[2, 3], &[3, 2], 61);
    let t = PairedTensorTrain::decompose(&x, 0.0, None).unwrap();
    let psi = x.psi_unfold();
    let (_, s_ref, _) = linalg::svd_econ(&psi).unwrap();
    let triples = etsvd(&t, 0.5, None).unwrap();
    for tr in &triples {
        assert!(tr.sigma > 0.5 * s_ref[0]);
    }
    assert_eq!(
        triples.len(),
        s_ref.iter().filter(|&&s| s > 0.5 * s_ref[0]).count()
    );
    let capped = etsvd(&t, 0.0, Some(2)).unwrap();
    assert_eq!(capped.len(), 2);
}

#[test]
fn psd_eigendecomposition_matches_dense_eigen() {
    let shape = Shape::new(vec![2, 3, 2]).unwrap();
    let total = shape.total();
    let mut rng = ChaCha8Rng::seed_from_u64(71);
    let m = Array2::from_shape_fn((total, 5), |_| rng.gen_range(-1.0..1.0));
    let g = m.dot(&m.t());
    let x = PairedTensor::psi_fold(&g.view(), shape.clone(), shape.clone()).unwrap();
    let t = PairedTensorTrain::decompose(&x, 0.0, None).unwrap();

    let pairs = u_eigendecompose_psd(&t, 1e-11, None).unwrap();
    let eigs = linalg::eigh_sym(&g).unwrap();
    let mut lam: Vec<f64> = eigs.0.to_vec();
    lam.reverse();
    assert_eq!(pairs.len(), 5);
    for (k, (val, vec)) in pairs.iter().enumerate() {
        assert_abs_diff_eq!(*val, lam[k], epsilon = 1e-8 * lam[0]);
        let u = vec.reconstruct().unwrap();
        let gu = g.dot(&Array1::from_vec(u.data().to_vec()));
        for (a, b) in gu.iter().zip(u.data()) {
            assert_abs_diff_eq!(*a, val * b, epsilon = 1e-7 * lam[0]);
        }
    }

    let skewed = random_paired(&[2, 2], &[2, 2], 73);
    let ts = PairedTensorTrain::decompose(&skewed, 0.0, None).unwrap();
    assert!(matches!(
        u_eigendecompose_psd(&ts, 1e-10, None),
        Err(crate::error::Error::NotSymmetric { .. })
    ));
}

#[test]
fn quantization_preserves_unfolding() {
    let x = random_paired(&[4, 6], &[2, 3], 81);
    let plan = QuantizationPlan::auto(x.row_shape(), x.col_shape()).unwrap();
    assert_eq!(plan.quantized_row_shape().sizes(), &[2, 2, 2, 3]);
    assert_eq!(plan.quantized_col_shape().sizes(), &[2, 1, 3, 1]);

    let q = quantized_paired(&x, &plan).unwrap();
    let a = x.psi_unfold();
    let b = q.psi_unfold();
    assert_eq!(a.dim(), b.dim());
    assert!((&a - &b).iter().map(|v| v.abs()).fold(0.0, f64::max) < 1e-15);

    let back = unquantize_paired(&q, &plan, x.row_shape(), x.col_shape()).unwrap();
    assert!(max_abs_diff(back.data(), x.data()) < 1e-15);

    let t = quantize(&x, &plan, 0.0, None).unwrap();
    let qb = t.reconstruct().unwrap();
    assert!(max_abs_diff(qb.data(), q.data()) < 1e-12);

    let plan63 = QuantizationPlan::auto(
        &Shape::new(vec![63]).unwrap(),
        &Shape::new(vec![63]).unwrap(),
    )
    .unwrap();
    assert_eq!(plan63.quantized_row_shape().sizes(), &[3, 3, 7]);
}

#[test]
fn block_stack_matches_dense_blocking() {
    let rows = vec![2usize, 3];
    let cols = vec![2usize, 2];
    let blocks_tt: Vec<PairedTensorTrain> = (0..4)
        .map(|k| {
            PairedTensorTrain::random(
                &Shape::new(rows.clone()).unwrap(),
                &Shape::new(cols.clone()).unwrap(),
                &[2],
                90 + k,
            )
            .unwrap()
        })
        .collect();
    let blocks_dense: Vec<PairedTensor> = blocks_tt
        .iter()
        .map(|t| t.reconstruct().unwrap())
        .collect();

    let fact = Factorization::new(vec![2, 2]).unwrap();
    let stacked = block_tt_row(&blocks_tt, &fact).unwrap();
    assert_eq!(stacked.col_shape().sizes(), &[4, 4]);
    assert_eq!(stacked.ranks(), vec![1, 8, 1]);
    let oracle = PairedTensor::block_row(&blocks_dense, &fact).unwrap();
    assert!(max_abs_diff(stacked.reconstruct().unwrap().data(), oracle.data()) < 1e-12);

    for k in 0..4 {
        let ext = block_tt_extract(&stacked, &fact, k).unwrap();
        assert!(max_abs_diff(
            ext.reconstruct().unwrap().data(),
            blocks_dense[k].data()
        ) < 1e-12);
    }

    let single = block_tt_row_n(&blocks_tt[..2], 1).unwrap();
    assert_eq!(single.col_shape().sizes(), &[2, 4]);
    assert_eq!(single.ranks(), vec![1, 4, 1]);
    let oracle_n = PairedTensor::block_row_n(&blocks_dense[..2], 1).unwrap();
    assert!(max_abs_diff(single.reconstruct().unwrap().data(), oracle_n.data()) < 1e-12);
}

#[test]
fn operator_application_matches_unfolding() {
    let a = PairedTensorTrain::random(
        &Shape::new(vec![2, 3]).unwrap(),
        &Shape::new(vec![3, 2]).unwrap(),
        &[3],
        101,
    )
    .unwrap();
    let x = random_dense(&[3, 2], 102);
    let y = a.apply_dense(&x).unwrap();

    let psi = a.reconstruct().unwrap().psi_unfold();
    let xv = Array1::from_vec(x.data().to_vec());
    let oracle = psi.dot(&xv);
    assert!(max_abs_diff(y.data(), oracle.as_slice().unwrap()) < 1e-12);

    let xt = TensorTrain::decompose(&x, 0.0, None).unwrap();
    let yt = a.apply_tt(&xt).unwrap();
    assert_eq!(
        yt.ranks()[1],
        a.ranks()[1] * xt.ranks()[1]
    );
    assert!(max_abs_diff(yt.reconstruct().unwrap().data(), y.data()) < 1e-12);
}

#[test]
fn power_iteration_estimates_dominant_growth() {
    let shape = Shape::new(vec![2, 2]).unwrap();
    let mut a = PairedTensorTrain::identity(&shape);
    a.scale(0.7);
    let rho = power_radius(&a, 30, 1e-12, 20, 7).unwrap();
    assert_abs_diff_eq!(rho, 0.7, epsilon = 1e-8);

    let diag = PairedTensor::from_fn(shape.clone(), shape.clone(), |j, i| {
        if j == i {
            match (j[0], j[1]) {
                (0, 0) => 0.9,
                (1, 0) => 0.4,
                (0, 1) => 0.2,
                _ => 0.1,
            }
        } else {
            0.0
        }
    })
    .unwrap();
    let t = PairedTensorTrain::decompose(&diag, 0.0, None).unwrap();
    let rho = power_radius(&t, 60, 1e-12, 20, 8).unwrap();
    assert!((rho - 0.9).abs() < 0.02, "estimate {}", rho);
}
