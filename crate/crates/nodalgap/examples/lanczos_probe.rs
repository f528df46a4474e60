use nodalgap::geometry::*;
use nodalgap::mesh::*;
use nodalgap::sparse::*;
use nodalgap::spectral::*;

fn main() {
    let zero = BoundaryProfile::new(ProfileKind::Polynomial { coefficients: vec![] }, SmoothnessClass::C5);
    let spec = DomainSpec::new(2.0, 0.0, zero).unwrap();
    let mesh = build_mesh(&spec, 33).unwrap();
    let op = assemble(&mesh).unwrap();
    let sigma = target_shift(2.0);
    println!("dim = {}", op.dim());
    // Manual power-iteration sanity: apply (K - sigma M)^-1 M a few times.
    let f = factorize_shifted(&op.stiffness, &op.mass, sigma).unwrap();
    let n = op.dim();
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 37 % 101) as f64 / 101.0) - 0.5).collect();
    for it in 0..40 {
        let mv = op.mass.matvec_alloc(&v);
        let mut w = vec![0.0; n];
        f.solve(&mv, &mut w);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        for x in &mut w { *x /= norm; }
        // Rayleigh quotient for generalized problem
        let kw = op.stiffness.matvec_alloc(&w);
        let mw = op.mass.matvec_alloc(&w);
        let mu = dot(&w, &kw) / dot(&w, &mw);
        if it % 10 == 9 { println!("power it {it}: mu = {mu:.6}"); }
        v = w;
    }
    let kw = op.stiffness.matvec_alloc(&v);
    let mw = op.mass.matvec_alloc(&v);
    let mu = dot(&v, &kw) / dot(&v, &mw);
    let mnorm = dot(&v, &mw).sqrt();
    let res: f64 = kw.iter().zip(&mw).map(|(a, b)| (a - mu * b).powi(2)).sum::<f64>().sqrt() / mnorm;
    println!("power final mu = {mu:.8}, residual = {res:.3e}, 5pi^2 = {:.8}", 5.0 * std::f64::consts::PI.powi(2));
}

fn dot(a: &[f64], b: &[f64]) -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() }
