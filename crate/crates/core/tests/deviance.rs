use approx::assert_abs_diff_eq;
use hsm::datasets;
use hsm::fit::{compare, fit_component, fit_hsm};

#[test]
fn wam_model2_within_model1() {
    let wam = datasets::wam();
    let m1 = datasets::model("wam-model1").unwrap().build_for(&wam).unwrap();
    let m2 = datasets::model("wam-model2").unwrap().build_for(&wam).unwrap();
    assert_eq!((m1.dim(), m2.dim()), (32, 30));
    let c = compare(&wam, &m2, Some(&m1)).unwrap();
    assert_abs_diff_eq!(c.g2, 1.851, epsilon = 0.01);
    assert_eq!(c.df, 2);
    assert_abs_diff_eq!(c.p_asymptotic, 0.396, epsilon = 0.001);
}

#[test]
fn pewee_deviances() {
    let pw = datasets::pewee();
    let p1 = datasets::model("pewee-model1").unwrap().build_for(&pw).unwrap();
    let p2 = datasets::model("pewee-model2").unwrap().build_for(&pw).unwrap();
    assert_eq!((p1.dim(), p2.dim()), (20, 10));
    let a = compare(&pw, &p1, None).unwrap();
    assert_abs_diff_eq!(a.g2, 142.4, epsilon = 0.1);
    assert_eq!(a.df, 16);
    let b = compare(&pw, &p2, Some(&p1)).unwrap();
    assert_abs_diff_eq!(b.g2, 66.9, epsilon = 0.1);
    assert_eq!(b.df, 10);
}

#[test]
fn pewee_model1_closed_form() {
    // p_ijk = x_ij+ x_+jk / (n x_+j+)
    let pw = datasets::pewee();
    let p1 = datasets::model("pewee-model1").unwrap().build_for(&pw).unwrap();
    let f = fit_hsm(&p1, &pw).unwrap();
    let x = |i: usize, j: usize, k: usize| pw.get(&[i, j, k]) as f64;
    let n = pw.n() as f64;
    for i in 0..4 {
        for j in 0..4 {
            for k in 0..4 {
                if pw.is_structural_zero(&[i, j, k]) {
                    assert_eq!(f.p_hat[pw.shape().index(&[i, j, k])], 0.0);
                    continue;
                }
                let xij: f64 = (0..4).map(|k| x(i, j, k)).sum();
                let xjk: f64 = (0..4).map(|i| x(i, j, k)).sum();
                let xj: f64 = (0..4).flat_map(|i| (0..4).map(move |k| (i, k))).map(|(i, k)| x(i, j, k)).sum();
                let expect = xij * xjk / (n * xj);
                assert_abs_diff_eq!(f.p_hat[pw.shape().index(&[i, j, k])], expect, epsilon = 1e-12);
            }
        }
    }
}

#[test]
fn localized_and_whole_pewee_model2_agree() {
    let pw = datasets::pewee();
    let p2 = datasets::model("pewee-model2").unwrap().build_for(&pw).unwrap();
    let w = fit_component(&p2, &pw).unwrap();
    let l = fit_hsm(&p2, &pw).unwrap();
    assert_abs_diff_eq!(w.g2, l.g2, epsilon = 1e-8);
}

#[test]
fn bundled_cells() {
    // pewee x(A,B,A) and the first WAM cell.
    assert_eq!(datasets::pewee().get(&[0, 1, 0]), 19);
    assert_eq!(datasets::wam().get(&[0; 6]), 37);
}
