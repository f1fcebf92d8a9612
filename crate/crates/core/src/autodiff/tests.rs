use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;

const H: f64 = 1e-5;

fn random(shape: &[usize], rng: &mut ChaCha8Rng) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
}

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

#[test]
fn matmul_identity_and_annihilation() {
    let mut t = Tape::new();
    let i = t.constant(Tensor::identity(2));
    let m = t.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    let p = t.matmul(i, m).unwrap();
    assert_eq!(t.value(p).data(), &[1.0, 2.0, 3.0, 4.0]);

    let a = t.constant(Tensor::from_rows(&[vec![1.0, 0.0], vec![0.0, 0.0]]).unwrap());
    let b = t.constant(Tensor::from_rows(&[vec![0.0, 0.0], vec![0.0, 1.0]]).unwrap());
    let z = t.matmul(a, b).unwrap();
    assert_eq!(t.value(z).data(), &[0.0; 4]);
}

#[test]
fn matmul_shape_error_reports_both_shapes() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::zeros(&[2, 3]));
    let b = t.constant(Tensor::zeros(&[2, 3]));
    match t.matmul(a, b) {
        Err(Error::Shape { left, right, .. }) => {
            assert_eq!(left, vec![2, 3]);
            assert_eq!(right, vec![2, 3]);
        }
        other => panic!("expected shape error, got {other:?}"),
    }
}

#[test]
fn matmul_gradient() {
    let mut r = rng();
    let b = random(&[4, 2], &mut r);
    let a = random(&[3, 4], &mut r);
    let err = grad_check(
        |t, x| {
            let bb = t.constant(b.clone());
            let p = t.matmul(x, bb)?;
            Ok(t.sum(p))
        },
        &a,
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");

    // d sum(a b) / d a = 1 b^T: every row equals the row-sums of b.
    let mut t = Tape::new();
    let av = t.variable(a.clone());
    let bv = t.constant(b.clone());
    let p = t.matmul(av, bv).unwrap();
    let s = t.sum(p);
    let g = t.grad(s, &[av]).unwrap().remove(0);
    for i in 0..3 {
        for k in 0..4 {
            assert!((g.get(i, k) - (b.get(k, 0) + b.get(k, 1))).abs() < 1e-15);
        }
    }
}

#[test]
fn transpose_cases() {
    let mut t = Tape::new();
    let m = t.constant(Tensor::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap());
    let mt = t.transpose(m).unwrap();
    assert_eq!(t.value(mt).data(), &[1.0, 3.0, 2.0, 4.0]);

    let s = t.constant(Tensor::from_rows(&[vec![1.0, 5.0], vec![5.0, 2.0]]).unwrap());
    let st = t.transpose(s).unwrap();
    assert_eq!(t.value(st), t.value(s));

    let x = random(&[5, 3], &mut rng());
    let xv = t.constant(x.clone());
    let once = t.transpose(xv).unwrap();
    let twice = t.transpose(once).unwrap();
    assert_eq!(t.value(twice), &x);

    let v = t.constant(Tensor::scalar(1.0));
    assert!(matches!(t.transpose(v), Err(Error::Shape { .. })));
}

#[test]
fn elementwise_cases() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
    let b = t.constant(Tensor::new(vec![2], vec![3.0, 4.0]).unwrap());
    let s = t.add(a, b).unwrap();
    assert_eq!(t.value(s).data(), &[4.0, 6.0]);
    let c = t.constant(Tensor::zeros(&[3]));
    assert!(matches!(t.add(a, c), Err(Error::Shape { .. })));

    let x = t.variable(Tensor::new(vec![2], vec![1.5, -2.0]).unwrap());
    let zeros = t.constant(Tensor::zeros(&[2]));
    let prod = t.mul(x, zeros).unwrap();
    assert_eq!(t.value(prod).data(), &[0.0, 0.0]);
    let loss = t.sum(prod);
    assert_eq!(t.grad(loss, &[x]).unwrap()[0].data(), &[0.0, 0.0]);

    let v = random(&[6], &mut rng());
    let err = grad_check(
        |t, x| {
            let y = t.scale(x, 2.0);
            let y2 = t.mul(y, y)?;
            Ok(t.sum(y2))
        },
        &v,
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");

    let err = grad_check(
        |t, x| {
            let k = t.constant(Tensor::filled(&[6], 0.3));
            let d = t.sub(k, x)?;
            let p = t.mul(d, x)?;
            Ok(t.sum(p))
        },
        &v,
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn relu_cases() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::new(vec![3], vec![-1.0, 0.0, 2.0]).unwrap());
    let y = t.relu(x);
    assert_eq!(t.value(y).data(), &[0.0, 0.0, 2.0]);
    let pos = t.constant(Tensor::new(vec![2], vec![0.0, 3.0]).unwrap());
    let y = t.relu(pos);
    assert_eq!(t.value(y).data(), &[0.0, 3.0]);

    // Subgradient at exactly zero is zero.
    let z = t.variable(Tensor::new(vec![1], vec![0.0]).unwrap());
    let y = t.relu(z);
    let s = t.sum(y);
    assert_eq!(t.grad(s, &[z]).unwrap()[0].data(), &[0.0]);

    let mut r = rng();
    let data: Vec<f64> = (0..8)
        .map(|_| {
            let v: f64 = r.gen_range(1e-2..1.0);
            if r.gen_bool(0.5) { v } else { -v }
        })
        .collect();
    let err = grad_check(
        |t, x| {
            let y = t.relu(x);
            let y2 = t.mul(y, y)?;
            Ok(t.sum(y2))
        },
        &Tensor::new(vec![8], data).unwrap(),
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn segment_softmax_cases() {
    let mut t = Tape::new();
    let one: Arc<[usize]> = vec![0, 3].into();
    let x = t.constant(Tensor::column(vec![0.0; 3]));
    let y = t.segment_softmax(x, one).unwrap();
    for v in t.value(y).data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }

    let x = t.constant(Tensor::column(vec![7.3]));
    let y = t.segment_softmax(x, vec![0, 1].into()).unwrap();
    assert_eq!(t.value(y).data(), &[1.0]);

    let two: Arc<[usize]> = vec![0, 2, 3].into();
    let x = t.constant(Tensor::column(vec![1.0, 2.0, 0.0]));
    let y = t.segment_softmax(x, two.clone()).unwrap();
    let e = std::f64::consts::E;
    let expect = [1.0 / (1.0 + e), e / (1.0 + e), 1.0];
    for (got, want) in t.value(y).data().iter().zip(expect) {
        assert!((got - want).abs() < 1e-15, "{got} vs {want}");
    }

    let weights = [0.3, -1.2, 2.0];
    let err = grad_check(
        |t, x| {
            let y = t.segment_softmax(x, two.clone())?;
            let w = t.constant(Tensor::column(weights.to_vec()));
            let p = t.mul(y, w)?;
            let p2 = t.mul(p, y)?;
            Ok(t.sum(p2))
        },
        &Tensor::column(vec![1.0, 2.0, 0.0]),
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");

    let x = t.constant(Tensor::column(vec![1.0, 2.0]));
    assert!(matches!(
        t.segment_softmax(x, vec![0, 0, 2].into()),
        Err(Error::Domain(_))
    ));
}

#[test]
fn segment_softmax_is_stable_for_large_logits() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::column(vec![1000.0, 1000.0, -1000.0]));
    let y = t.segment_softmax(x, vec![0, 3].into()).unwrap();
    let out = t.value(y).data();
    assert!(out.iter().all(|v| v.is_finite()));
    assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn concat_cases() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::column(vec![1.0, 2.0]));
    let single = t.concat_cols(&[a]).unwrap();
    assert_eq!(t.value(single), t.value(a));
    let b = t.constant(Tensor::column(vec![3.0, 4.0]));
    let ab = t.concat_cols(&[a, b]).unwrap();
    assert_eq!(t.value(ab).shape(), &[2, 2]);
    assert_eq!(t.value(ab).data(), &[1.0, 3.0, 2.0, 4.0]);
    let c = t.constant(Tensor::column(vec![1.0]));
    assert!(matches!(t.concat_cols(&[a, c]), Err(Error::Shape { .. })));

    let mut r = rng();
    let p1 = random(&[3, 2], &mut r);
    let p3 = random(&[3, 4], &mut r);
    let w = random(&[3, 7], &mut r);
    let err = grad_check(
        |t, x| {
            let a = t.constant(p1.clone());
            let c = t.constant(p3.clone());
            let cat = t.concat_cols(&[a, x, c])?;
            let ww = t.constant(w.clone());
            let p = t.mul(cat, cat)?;
            let p = t.mul(p, ww)?;
            Ok(t.sum(p))
        },
        &random(&[3, 1], &mut r),
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn feature_mean_var_cases() {
    let mut t = Tape::new();
    let x = t.constant(Tensor::from_rows(&[vec![0.0, 5.0], vec![2.0, 5.0]]).unwrap());
    let (mean, var) = t.feature_mean_var(x).unwrap();
    assert_eq!(t.value(mean).data(), &[1.0, 5.0]);
    assert_eq!(t.value(var).data(), &[1.0, 0.0]);

    let empty = t.constant(Tensor::zeros(&[0, 2]));
    assert!(matches!(t.feature_mean_var(empty), Err(Error::Domain(_))));

    let mut r = rng();
    let w = random(&[4, 3], &mut r);
    let err = grad_check(
        |t, x| {
            let (mean, var) = t.feature_mean_var(x)?;
            let mb = t.broadcast_rows(mean, 4)?;
            let c = t.sub(x, mb)?;
            let ve = t.add_scalar(var, 1e-5);
            let inv = t.rsqrt(ve);
            let ib = t.broadcast_rows(inv, 4)?;
            let norm = t.mul(c, ib)?;
            let ww = t.constant(w.clone());
            let p = t.mul(norm, ww)?;
            Ok(t.sum(p))
        },
        &random(&[4, 3], &mut r),
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn dropout_cases() {
    let mut t = Tape::new();
    let mut r = rng();
    let x = t.constant(Tensor::filled(&[10], 1.0));
    assert_eq!(t.dropout(x, 0.0, true, &mut r).unwrap(), x);
    assert_eq!(t.dropout(x, 0.7, false, &mut r).unwrap(), x);
    assert!(matches!(t.dropout(x, 1.0, true, &mut r), Err(Error::Domain(_))));

    let big = t.constant(Tensor::filled(&[100_000], 1.0));
    let y = t.dropout(big, 0.2, true, &mut r).unwrap();
    let vals = t.value(y).data();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((mean - 1.0).abs() < 0.01, "{mean}");
    assert!(vals.iter().all(|&v| v == 0.0 || (v - 1.25).abs() < 1e-15));
}

#[test]
fn dropout_is_seeded() {
    let run = || {
        let mut t = Tape::new();
        let mut r = ChaCha8Rng::seed_from_u64(99);
        let x = t.constant(Tensor::filled(&[64], 1.0));
        let y = t.dropout(x, 0.2, true, &mut r).unwrap();
        t.value(y).clone()
    };
    assert_eq!(run(), run());
}

#[test]
fn l1_cases() {
    let mut t = Tape::new();
    let a = t.constant(Tensor::column(vec![0.3, 0.4]));
    let l = t.l1_loss(a, a).unwrap();
    assert_eq!(t.value(l).item(), 0.0);

    let p = t.constant(Tensor::column(vec![0.0, 2.0]));
    let q = t.constant(Tensor::column(vec![1.0, 0.0]));
    let l = t.l1_loss(p, q).unwrap();
    assert_eq!(t.value(l).item(), 1.5);

    let z = t.constant(Tensor::column(vec![1.0]));
    assert!(matches!(t.l1_loss(p, z), Err(Error::Shape { .. })));

    // Tie gives a zero subgradient.
    let v = t.variable(Tensor::column(vec![0.5]));
    let c = t.constant(Tensor::column(vec![0.5]));
    let l = t.l1_loss(v, c).unwrap();
    assert_eq!(t.grad(l, &[v]).unwrap()[0].data(), &[0.0]);

    let mut r = rng();
    let target = random(&[5, 1], &mut r);
    let err = grad_check(
        |t, x| {
            let tt = t.constant(target.clone());
            t.l1_loss(x, tt)
        },
        &random(&[5, 1], &mut r),
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn backward_fixtures() {
    let mut store = ParamStore::new();
    let w = store.add("w", Tensor::from_rows(&[vec![0.5, -1.0], vec![2.0, 0.1]]).unwrap());
    let unused = store.add("unused", Tensor::filled(&[2, 2], 3.0));
    let x = Tensor::column(vec![3.0, 4.0]);

    let mut t = Tape::new();
    let wv = t.param(&store, w);
    let _ = t.param(&store, unused);
    let xv = t.constant(x);
    let y = t.matmul(wv, xv).unwrap();
    let loss = t.sum(y);
    t.backward(loss, &mut store).unwrap();
    // d sum(W x) / dW = 1 x^T
    assert_eq!(store.get(w).grad.data(), &[3.0, 4.0, 3.0, 4.0]);
    assert_eq!(store.get(unused).grad.data(), &[0.0; 4]);

    // A second sweep over the same tape doubles the accumulated gradient.
    t.backward(loss, &mut store).unwrap();
    assert_eq!(store.get(w).grad.data(), &[6.0, 8.0, 6.0, 8.0]);

    store.zero_grad();
    assert!(store.iter().all(|p| p.grad.data().iter().all(|&g| g == 0.0)));
    assert!(matches!(t.backward(y, &mut store), Err(Error::Domain(_))));
}

#[test]
fn grad_check_quadratic() {
    let err = grad_check(
        |t, x| {
            let sq = t.mul(x, x)?;
            Ok(t.sum(sq))
        },
        &Tensor::new(vec![2], vec![1.0, 2.0]).unwrap(),
        H,
    )
    .unwrap();
    assert!(err < 1e-8, "{err}");
}

#[test]
fn gather_scatter_rowdot_gradients() {
    let mut r = rng();
    let idx: Arc<[u32]> = vec![0, 2, 2, 1, 3].into();
    let dst: Arc<[u32]> = vec![1, 1, 0, 3, 2].into();
    let other = random(&[5, 3], &mut r);
    let scale = random(&[5, 1], &mut r);
    let err = grad_check(
        |t, x| {
            let g = t.gather_rows(x, idx.clone())?;
            let o = t.constant(other.clone());
            let d = t.row_dot(g, o)?;
            let s = t.constant(scale.clone());
            let m = t.mul_rows(g, d)?;
            let m = t.mul_rows(m, s)?;
            let back = t.scatter_add_rows(m, dst.clone(), 4)?;
            let sq = t.mul(back, back)?;
            Ok(t.sum(sq))
        },
        &random(&[4, 3], &mut r),
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn minmax_and_triangle_gradients() {
    let mut t = Tape::new();
    let c = t.constant(Tensor::filled(&[2, 2], 0.7));
    let mm = t.minmax_scale(c).unwrap();
    assert_eq!(t.value(mm).data(), &[0.0; 4]);

    let mut r = rng();
    let w = random(&[6, 1], &mut r);
    let err = grad_check(
        |t, x| {
            let xt = t.transpose(x)?;
            let g = t.matmul(xt, x)?;
            let s = t.minmax_scale(g)?;
            let u = t.upper_tri(s)?;
            let ww = t.constant(w.clone());
            let p = t.mul(u, ww)?;
            let full = t.devectorize(p, 4)?;
            let flat = t.gather_flat(full, vec![1, 4, 7, 14].into())?;
            let sq = t.mul(flat, flat)?;
            Ok(t.sum(sq))
        },
        &random(&[3, 4], &mut r),
        H,
    )
    .unwrap();
    assert!(err < 1e-6, "{err}");
}

#[test]
fn forward_values_stay_finite() {
    let mut r = rng();
    let mut t = Tape::new();
    let x = t.constant(random(&[5, 5], &mut r));
    let y = t.matmul(x, x).unwrap();
    let y = t.minmax_scale(y).unwrap();
    let u = t.upper_tri(y).unwrap();
    let s = t.segment_softmax(u, vec![0, 4, 10].into()).unwrap();
    assert!(t.value(s).is_finite());
}
