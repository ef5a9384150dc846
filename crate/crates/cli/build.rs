use std::process::Command;

fn main() {
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    println!("cargo:rerun-if-changed=../../.git/index");
    let describe = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .unwrap_or_default();
    let version = if describe.is_empty() {
        String::new()
    } else {
        format!("v{}-{describe}", env!("CARGO_PKG_VERSION"))
    };
    println!("cargo:rustc-env=RESHAPE_OT_GIT_DESCRIBE={version}");
}
