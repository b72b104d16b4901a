fn main() {
    // cblas-sys declares the CBLAS interface but links nothing itself.
    println!("cargo:rustc-link-lib=dylib=openblas");
}
