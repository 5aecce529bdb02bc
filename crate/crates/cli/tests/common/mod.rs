use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Child, Command, Stdio};

use dof_core::image_io::save_pgm16;
use dof_core::synth::{gen_synthetic, Placement};
use dof_core::GrayImage;

pub const BIN: &str = env!("CARGO_BIN_EXE_dof");

pub fn write_constant_image(path: &Path, w: usize, h: usize, value: f64) {
    let img = GrayImage::constant(w, h, value).unwrap();
    save_pgm16(&img, path).unwrap();
}

pub fn write_blob_image(path: &Path, w: usize, h: usize, blobs: usize, seed: u64) {
    let img = gen_synthetic(w, h, blobs, (1.5, 4.0), seed, Placement::Random).unwrap();
    save_pgm16(&img, path).unwrap();
}

pub struct Server {
    child: Child,
    pub base_url: String,
}

impl Server {
    /// Spawn `dof serve --port 0` and parse the bound address from stdout.
    pub fn spawn(root: &Path, extra_args: &[&str]) -> Server {
        let mut child = Command::new(BIN)
            .arg("serve")
            .arg("--port")
            .arg("0")
            .arg("--root")
            .arg(root)
            .args(extra_args)
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .expect("spawn dof serve");
        let stdout = child.stdout.take().unwrap();
        let mut line = String::new();
        BufReader::new(stdout).read_line(&mut line).unwrap();
        let addr = line
            .trim()
            .strip_prefix("listening on ")
            .unwrap_or_else(|| panic!("unexpected startup line: {line:?}"))
            .to_owned();
        Server {
            child,
            base_url: addr,
        }
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
