use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use heislab_ffi::*;

const P: [f64; 3] = [1.5, 1.5, 1.5];

fn last_error() -> String {
    unsafe { CStr::from_ptr(hl_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn optimal_constant_and_errors() {
    let mut v = 0.0;
    assert_eq!(unsafe { hl_optimal_constant(P.as_ptr(), 3, &mut v) }, HlStatus::Ok);
    assert!((v - 3.0 * 3f64.sqrt() / 8.0).abs() < 1e-12);
    assert!(last_error().is_empty());

    let bad = [1.5, 1.5, 1.2];
    assert_eq!(unsafe { hl_optimal_constant(bad.as_ptr(), 3, &mut v) }, HlStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(unsafe { hl_optimal_constant(ptr::null(), 3, &mut v) }, HlStatus::NullPointer);
    assert_eq!(unsafe { hl_optimal_constant(P.as_ptr(), 3, ptr::null_mut()) }, HlStatus::NullPointer);
}

#[test]
fn gaussians_attain_the_constant() {
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { hl_triple_gaussians(P.as_ptr(), 1, &mut f) }, HlStatus::Ok);
    let (mut re, mut im) = (0.0, 0.0);
    let z = [0.0, 0.0, 0.0];
    assert_eq!(unsafe { hl_triple_eval(f, 2, z.as_ptr(), 3, &mut re, &mut im) }, HlStatus::Ok);
    assert_eq!((re, im), (1.0, 0.0));
    assert_eq!(unsafe { hl_triple_eval(f, 3, z.as_ptr(), 3, &mut re, &mut im) }, HlStatus::InvalidArgument);
    assert_eq!(unsafe { hl_triple_eval(f, 0, z.as_ptr(), 2, &mut re, &mut im) }, HlStatus::InvalidArgument);

    let a = [0.0; 4];
    let (mut d, mut e) = (1.0, 1.0);
    assert_eq!(unsafe { hl_deficit(f, P.as_ptr(), a.as_ptr(), 4, 0.0, 20, &mut d, &mut e) }, HlStatus::Ok);
    assert!(d.abs() < 1e-10, "{d}");
    assert_eq!(unsafe { hl_deficit(f, P.as_ptr(), a.as_ptr(), 3, 0.0, 20, &mut d, &mut e) }, HlStatus::InvalidArgument);
    assert_eq!(unsafe { hl_phi(f, P.as_ptr(), a.as_ptr(), 4, 0.0, 2, &mut d, &mut e) }, HlStatus::InvalidArgument);
    unsafe { hl_triple_free(f) };
    unsafe { hl_triple_free(ptr::null_mut()) };
}

#[test]
fn perturbation_has_positive_deficit() {
    let alpha = [1u32, 1, 1];
    let mut f = ptr::null_mut();
    assert_eq!(unsafe { hl_triple_perturbed(P.as_ptr(), 1, 0.05, alpha.as_ptr(), 3, &mut f) }, HlStatus::Ok);
    let a = [0.0; 4];
    let (mut d, mut e) = (0.0, 0.0);
    assert_eq!(unsafe { hl_deficit(f, P.as_ptr(), a.as_ptr(), 4, 0.0, 30, &mut d, &mut e) }, HlStatus::Ok);
    assert!(d > 0.0 && d < 0.1 && e < d, "{d} ± {e}");
    unsafe { hl_triple_free(f) };

    let mut g = ptr::null_mut();
    assert_eq!(unsafe { hl_triple_lambda(P.as_ptr(), 0.0, &mut g) }, HlStatus::InvalidArgument);
    assert!(g.is_null());
    assert_eq!(unsafe { hl_triple_lambda(P.as_ptr(), 2.0, &mut g) }, HlStatus::Ok);
    unsafe { hl_triple_free(g) };
}

#[test]
fn config_and_run() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { hl_config_new(&mut cfg) }, HlStatus::Ok);
    let set = |k: &str, v: &str| {
        let (k, v) = (CString::new(k).unwrap(), CString::new(v).unwrap());
        unsafe { hl_config_set(cfg, k.as_ptr(), v.as_ptr()) }
    };
    assert_eq!(set("eps", "0.02"), HlStatus::Ok);
    assert_eq!(set("no-such-key", "1"), HlStatus::Config);
    assert_eq!(set("gh-nodes", "forty"), HlStatus::Config);

    let mut json = ptr::null_mut();
    let mut failures = usize::MAX;
    let cmd = CString::new("deficit").unwrap();
    assert_eq!(unsafe { hl_run(cfg, cmd.as_ptr(), &mut json, &mut failures) }, HlStatus::Ok);
    assert_eq!(failures, 0);
    let text = unsafe { CStr::from_ptr(json) }.to_str().unwrap().to_owned();
    unsafe { hl_string_free(json) };
    assert!(text.contains("\"deficit\":"), "{text}");

    let cmd = CString::new("plot").unwrap();
    assert_eq!(unsafe { hl_run(cfg, cmd.as_ptr(), &mut json, &mut failures) }, HlStatus::InvalidArgument);
    let bytes = [0xffu8, 0];
    assert_eq!(unsafe { hl_run(cfg, bytes.as_ptr().cast(), &mut json, &mut failures) }, HlStatus::Utf8);
    unsafe { hl_config_free(cfg) };
}

fn compiles(compiler: &str, lang: &str, header: &Path) -> Option<bool> {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join(format!("t.{lang}"));
    std::fs::write(
        &src,
        "#include \"heislab.h\"\nint main(void) { HlConfig *c = 0; HlStatus s = hl_config_new(&c); hl_config_free(c); return s == HL_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new(compiler)
        .args(["-fsyntax-only", "-Wall", "-Werror", "-I"])
        .arg(header.parent().unwrap())
        .arg(&src)
        .status()
        .ok()?;
    Some(status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/heislab.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in ["hl_config_new", "hl_run", "hl_string_free", "HL_STATUS_PANIC", "typedef struct HlTriple HlTriple"] {
        assert!(text.contains(name), "{name} missing from header");
    }
    for (cc, lang) in [("cc", "c"), ("c++", "cpp")] {
        if let Some(ok) = compiles(cc, lang, &header) {
            assert!(ok, "{cc} rejected the header");
        }
    }
}
