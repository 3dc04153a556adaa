use std::env;
use std::path::PathBuf;

fn main() {
    let crate_dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").expect("set by cargo"));
    let header = crate_dir.join("include").join("tmkit.h");
    match cbindgen::generate(&crate_dir) {
        Ok(bindings) => {
            bindings.write_to_file(&header);
        }
        // A parse error here means lib.rs is mid-edit; the real diagnostics
        // come from rustc, so don't fail the build twice.
        Err(cbindgen::Error::ParseSyntaxError { .. }) => {}
        Err(err) => panic!("generating {}: {err}", header.display()),
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
