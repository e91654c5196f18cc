//! Ready-made AKS data for the two workhorse examples.

use crate::algebra::{
    lower_borel_basis, so_basis, strictly_upper_basis, MatrixAlgebra, Splitting, SplittingKind,
};
use crate::mat::Mat;
use crate::orbit::AksData;

/// Open Toda lattice set-up on `sl(n, R)`: `A` the strictly upper
/// triangular subalgebra, `B` the lower Borel, moments
/// `mu = sum E_{i+1,i}`, `nu = sum E_{i,i+1}`. The default Lax matrix at
/// the identity orbit point is `mu + nu`, and the `B`-orbit through `nu`
/// produces the Jacobi family `sum b_i e_ii + sum a_i e_{i,i+1} + sum
/// e_{i+1,i}`.
pub fn preset_toda(n: usize) -> AksData {
    assert!(n >= 2, "need n >= 2");
    let splitting = Splitting::new(
        MatrixAlgebra::sl(n),
        SplittingKind::Triangular,
        strictly_upper_basis(n),
        lower_borel_basis(n),
    )
    .expect("triangular splitting of sl(n) is valid");
    let mut mu = Mat::zeros(n);
    let mut nu = Mat::zeros(n);
    for i in 0..n - 1 {
        mu[(i + 1, i)] = 1.0;
        nu[(i, i + 1)] = 1.0;
    }
    AksData::new(splitting, mu, nu).expect("Toda moments live in the right duals")
}

/// Iwasawa set-up on `sl(n, R)`: `A = so(n)`, `B` the lower Borel,
/// `mu = 0` and `nu` the symmetric traceless projection of
/// `sum E_{i,i+1}`. Factorization is global here, so the factorization
/// solver never reports a blow-up.
pub fn preset_iwasawa(n: usize) -> AksData {
    assert!(n >= 2, "need n >= 2");
    let splitting = Splitting::new(
        MatrixAlgebra::sl(n),
        SplittingKind::Iwasawa,
        so_basis(n),
        lower_borel_basis(n),
    )
    .expect("Iwasawa splitting of sl(n) is valid");
    let mut raised = Mat::zeros(n);
    for i in 0..n - 1 {
        raised[(i, i + 1)] = 1.0;
    }
    let nu = splitting.proj_a_perp(&raised);
    AksData::new(splitting, Mat::zeros(n), nu).expect("Iwasawa moments live in the right duals")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::orbit::hamiltonian;

    #[test]
    fn toda_sl2_defaults() {
        let aks = preset_toda(2);
        assert_eq!(aks.phase_space_dim(), 2);
        let l0 = aks
            .orbit_point(&Mat::identity(2), &Mat::identity(2))
            .unwrap();
        assert!((hamiltonian(&l0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn iwasawa_sl3_dimensions_and_moments() {
        let aks = preset_iwasawa(3);
        assert_eq!(aks.splitting().dim_a(), 3);
        assert_eq!(aks.splitting().dim_b(), 5);
        // mu = 0 is stabilized by all of A.
        assert_eq!(aks.little_a().len(), 3);
        // nu is the symmetric traceless image of the raising element under
        // the projection along B-perp (strictly lower), so the raising
        // entries keep coefficient one and get mirrored below the diagonal.
        let nu = aks.nu();
        assert!((nu - &nu.transpose()).norm_max() < 1e-14);
        assert!(nu.trace().abs() < 1e-14);
        assert!((nu[(0, 1)] - 1.0).abs() < 1e-14);
        assert!((nu[(1, 0)] - 1.0).abs() < 1e-14);
    }
}
