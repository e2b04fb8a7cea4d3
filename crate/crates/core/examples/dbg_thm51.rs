use sketched_krylov::dense::*;
use sketched_krylov::dense::lu::ShiftedHessenbergSolver;
use sketched_krylov::func::*;
use sketched_krylov::matfun::*;
use num_complex::Complex64;
use rand::prelude::*;
use rand_chacha::ChaCha20Rng;

fn main() {
    let mut rng = ChaCha20Rng::seed_from_u64(82);
    let d = 8;
    let m = Mat::from_fn(d, d, |i, j| if i <= j + 1 { rng.gen::<f64>() * 2.0 - 1.0 } else { 0.0 });
    let w: Vec<f64> = (0..d).map(|_| rng.gen::<f64>() * 2.0 - 1.0).collect();
    let f = ScaledExp::exp();
    let report = rank_one_report(&m, &w, &f).unwrap();
    let direct = direct_rank_one_difference(&m, &w, &f, SmallFunAlgo::Auto).unwrap();
    let nd: f64 = direct.iter().map(|v| v * v).sum::<f64>().sqrt();
    let diff: f64 = report.gw_w.iter().zip(&direct).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    println!("direct norm {nd:.6e}, rel err {:.3e}", diff / nd);

    // Check eigendecomposition residual of M + w e_d^T
    let mut mm = m.clone();
    for i in 0..d { mm[(i, d-1)] += w[i]; }
    let eig = hessenberg_eig(&mm).unwrap();
    let mc = mm.to_complex();
    for j in 0..d {
        let col = eig.x.column(j);
        let mx = mc.matvec(&col);
        let mut r = 0.0f64;
        for i in 0..d { r += (mx[i] - eig.lambdas[j] * col[i]).norm_sqr(); }
        println!("eig {j}: lambda {:.4} {:+.4}i residual {:.3e}", eig.lambdas[j].re, eig.lambdas[j].im, r.sqrt());
    }
    // X^{-1} X - I
    let mut p = eig.xinv.matmul(&eig.x);
    p.shift_diagonal(Complex64::new(-1.0, 0.0));
    println!("xinv defect {:.3e}", p.norm_fro());
    // reconstruct f via eig and compare with expm
    let e1 = expm(&mm).unwrap();
    let mut fx = CMat::zeros(d, d);
    for j in 0..d {
        let fl = eig.lambdas[j].exp();
        for i in 0..d { fx[(i, j)] = eig.x[(i, j)] * fl; }
    }
    let rec = fx.matmul(&eig.xinv);
    let err = rec.sub(&e1.to_complex()).norm_fro() / e1.norm_fro();
    println!("f(M+we) eig-reconstruction rel err {:.3e}", err);

    // term-by-term: sum alpha beta f[M,lam] w vs direct, recomputed here
    let fm = expm(&m).unwrap().to_complex();
    let wc: Vec<Complex64> = w.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let mut acc = vec![Complex64::new(0.0, 0.0); d];
    for i in 0..d {
        let solver = ShiftedHessenbergSolver::new(&m, eig.lambdas[i]);
        let z = solver.solve(&wc);
        let fz = fm.matvec(&z);
        let flam = eig.lambdas[i].exp();
        let term: Vec<Complex64> = fz.iter().zip(&z).map(|(a, b)| a - flam * b).collect();
        let coeff = eig.x[(d - 1, i)] * eig.xinv[(i, 0)];
        println!("i {i} |coeff| {:.3e} |term| {:.3e}", coeff.norm(), term.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
        for (k, t) in term.iter().enumerate() { acc[k] += coeff * t; }
    }
    let diff2: f64 = acc.iter().zip(&direct).map(|(a, b)| (a.re - b) * (a.re - b) + a.im * a.im).sum::<f64>().sqrt();
    println!("recomputed rel err {:.3e}", diff2 / nd);
}
