use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use pide_ffi::*;

fn c(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn last_error() -> String {
    let p = pide_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_string_lossy().into_owned();
    pide_string_free(p);
    s
}

const FAST: &str = "[print.auto_digits]\ndelay_ms = 0\n";

#[test]
fn session_round_trip() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(pide_session_new(c(FAST).as_ptr(), &mut s), PideStatus::Ok);
        let node = c("T.thy");
        let text = "theory T imports begin eval 2 + 3 end";
        assert_eq!(pide_session_insert(s, node.as_ptr(), 0, c(text).as_ptr()), PideStatus::Ok);
        assert_eq!(pide_session_set_perspective(s, node.as_ptr(), ptr::null(), 0, true), PideStatus::Ok);
        assert_eq!(pide_session_wait(s), PideStatus::Ok);
        assert!(pide_last_error().is_null());

        let mut out = ptr::null_mut();
        assert_eq!(pide_session_dump(s, node.as_ptr(), false, &mut out), PideStatus::Ok);
        let dump = take(out);
        assert!(dump.contains("result value=5"), "{dump}");
        assert!(dump.contains("digits: 1"));

        assert_eq!(pide_session_remove(s, node.as_ptr(), 29, 4), PideStatus::Ok);
        assert_eq!(pide_session_text(s, node.as_ptr(), &mut out), PideStatus::Ok);
        assert_eq!(take(out), "theory T imports begin eval 2 end");
        assert_eq!(pide_session_wait(s), PideStatus::Ok);
        assert_eq!(pide_session_dump(s, ptr::null(), true, &mut out), PideStatus::Ok);
        assert!(take(out).contains("result value=2"));
        pide_session_free(s);
    }
}

#[test]
fn errors_carry_status_and_message() {
    unsafe {
        let mut s = ptr::null_mut();
        assert_eq!(pide_session_new(c("workers = \"x\"").as_ptr(), &mut s), PideStatus::Config);
        assert!(s.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(pide_session_new(ptr::null(), &mut s), PideStatus::Ok);
        let node = c("T.thy");
        assert_eq!(pide_session_insert(s, node.as_ptr(), 5, c("x").as_ptr()), PideStatus::BadEdit);
        assert!(last_error().contains("out of bounds"), "{}", last_error());
        assert_eq!(pide_session_insert(s, ptr::null(), 0, c("x").as_ptr()), PideStatus::NullArgument);
        assert_eq!(pide_session_wait(ptr::null_mut()), PideStatus::NullArgument);
        let bad = [0xffu8, 0];
        assert_eq!(pide_session_insert(s, bad.as_ptr().cast(), 0, c("x").as_ptr()), PideStatus::InvalidUtf8);
        let reversed = [4usize, 2];
        assert_eq!(
            pide_session_set_perspective(s, node.as_ptr(), reversed.as_ptr(), 1, false),
            PideStatus::BadEdit
        );
        let mut out = ptr::null_mut();
        assert_eq!(pide_session_text(s, c("None.thy").as_ptr(), &mut out), PideStatus::BadEdit);
        pide_session_free(s);
        pide_session_free(ptr::null_mut());
        pide_string_free(ptr::null_mut());
    }
}

#[test]
fn scripts() {
    unsafe {
        let mut out = ptr::null_mut();
        let ok = "open T.thy\ninsert T.thy 0 \"theory T imports begin eval 4 end\"\nperspective T.thy full\nwait\ndump T.thy --eval-only\n";
        assert_eq!(pide_run_script(c(ok).as_ptr(), c(FAST).as_ptr(), &mut out), PideStatus::Ok);
        assert!(take(out).contains("value=4"));

        let failing = "open T.thy\nwait\nassert-contains T.thy \"nothing\"\n";
        assert_eq!(pide_run_script(c(failing).as_ptr(), ptr::null(), &mut out), PideStatus::Assertion);
        take(out);
        assert!(last_error().starts_with("line 3"));

        assert_eq!(pide_run_script(c("jump\n").as_ptr(), ptr::null(), &mut out), PideStatus::Script);
        assert!(last_error().contains("unknown directive jump"));
    }
}

fn target_dir() -> PathBuf {
    match std::env::var_os("CARGO_TARGET_DIR") {
        Some(d) => PathBuf::from(d),
        None => Path::new(env!("CARGO_MANIFEST_DIR")).join("../../target"),
    }
}

#[test]
fn c_program_links_against_the_header() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let profile = if cfg!(debug_assertions) { "debug" } else { "release" };
    let lib = target_dir().join(profile).join("libpide_ffi.a");
    if !lib.exists() {
        eprintln!("skipping: {} not built", lib.display());
        return;
    }
    let dir = tempfile_dir();
    let exe = dir.join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = status else {
        eprintln!("skipping: no C compiler");
        return;
    };
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("T.thy 23 33 result value=42\n"));
}

fn tempfile_dir() -> PathBuf {
    let d = std::env::temp_dir().join(format!("pide-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&d).unwrap();
    d
}
