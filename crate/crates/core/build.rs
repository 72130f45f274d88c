//! Link the system OpenBLAS, which bundles the LAPACK routines used through
//! `ndarray-linalg`/`lax`. We link it here directly instead of enabling a
//! `*-src` backend crate so the build never tries to download or compile a
//! BLAS from source.

fn main() {
    println!("cargo:rustc-link-lib=dylib=openblas");
}
