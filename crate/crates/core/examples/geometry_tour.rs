//! Log-ratio transforms and Aitchison distances on a three-part composition.

use aitchison_unmix::geometry::{self, OrthonormalBasis, SimplexVector};

fn main() -> aitchison_unmix::Result<()> {
    let basis = OrthonormalBasis::helmert(3)?;
    let a = SimplexVector::new(vec![0.59, 0.01, 0.4])?;
    let b = SimplexVector::uniform(3)?;

    println!("a          = {:?}", a.as_slice());
    println!("alr(a)     = {:?}", geometry::alr(&a)?.as_slice());
    println!("clr(a)     = {:?}", geometry::clr(&a)?.as_slice());
    let z = geometry::ilr(&a, &basis)?;
    println!("ilr(a)     = {:?}", z.as_slice());
    println!(
        "softmax(Hz)= {:?}",
        geometry::ilr_inv(&z, &basis)?.as_slice()
    );

    let d = geometry::geodesic_distance(&a, &b, &basis)?;
    println!("d(a, uniform) = {d:.6}");
    for t in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let c = geometry::geodesic_path(&a, &b, t, &basis)?;
        let v: Vec<String> = c.as_slice().iter().map(|x| format!("{x:.4}")).collect();
        println!("  t = {t:.2}: [{}]", v.join(", "));
    }
    Ok(())
}
