use std::process::Command;

fn main() {
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    println!("cargo:rerun-if-changed=../../.git/index");
    let out = Command::new("git").args(["describe", "--tags", "--always", "--dirty"]).output();
    if let Ok(out) = out {
        let id = String::from_utf8_lossy(&out.stdout).trim().to_string();
        if out.status.success() && !id.is_empty() {
            println!("cargo:rustc-env=VOLSUP_GIT_DESCRIBE={}-{id}", env!("CARGO_PKG_VERSION"));
        }
    }
}
