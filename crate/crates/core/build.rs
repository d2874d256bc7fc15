use std::path::Path;

// lapack-sys only declares the symbols. Prefer the reference LAPACK/BLAS
// archives when the system ships them: the OpenBLAS 0.3.20 kernels picked
// at run time on some AVX-512 machines return wrong Hermitian eigenvectors
// beyond a few hundred rows. `PHOTON_LATTICE_LAPACK=system` links the
// default `-llapack` instead.
fn main() {
    println!("cargo:rerun-if-env-changed=PHOTON_LATTICE_LAPACK");
    let lapack_dir = Path::new("/usr/lib/x86_64-linux-gnu/lapack");
    let blas_dir = Path::new("/usr/lib/x86_64-linux-gnu/blas");
    let want_system = std::env::var("PHOTON_LATTICE_LAPACK").is_ok_and(|v| v == "system");
    if !want_system && lapack_dir.join("liblapack.a").exists() && blas_dir.join("libblas.a").exists() {
        println!("cargo:rustc-link-search=native={}", lapack_dir.display());
        println!("cargo:rustc-link-search=native={}", blas_dir.display());
        println!("cargo:rustc-link-lib=static=lapack");
        println!("cargo:rustc-link-lib=static=blas");
        println!("cargo:rustc-link-lib=dylib=gfortran");
    } else {
        println!("cargo:rustc-link-lib=lapack");
    }
}
