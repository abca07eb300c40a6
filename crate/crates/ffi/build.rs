fn main() {
    let crate_dir = std::env::var("CARGO_MANIFEST_DIR").expect("cargo sets this");
    let config = cbindgen::Config {
        language: cbindgen::Language::C,
        include_guard: Some("GPCHAOS_H".into()),
        cpp_compat: true,
        documentation: true,
        ..cbindgen::Config::default()
    };
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("header generation")
        .write_to_file(format!("{crate_dir}/include/gpchaos.h"));
    println!("cargo:rerun-if-changed=src/lib.rs");
}
