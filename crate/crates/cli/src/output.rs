use std::path::{Path, PathBuf};

use serde::Serialize;
use simile_core::data::write_text;
use simile_core::Result;

/// Collects the files a command reads and writes, then records them in a
/// JSON manifest next to the outputs.
pub struct Run {
    out: PathBuf,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a, F: Serialize> {
    command: &'a str,
    version: &'a str,
    seed: u64,
    flags: &'a F,
    inputs: &'a [String],
    outputs: &'a [String],
}

impl Run {
    pub fn new(out: &Path) -> Self {
        Self {
            out: out.to_path_buf(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input<'p>(&mut self, path: &'p Path) -> &'p Path {
        self.inputs.push(path.display().to_string());
        path
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    pub fn write(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.path(name);
        write_text(&path, text)?;
        self.outputs.push(name.to_owned());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }

    /// Records a file written by library code.
    pub fn produced(&mut self, name: &str) {
        self.outputs.push(name.to_owned());
    }

    pub fn finish<F: Serialize>(mut self, command: &str, seed: u64, flags: &F) -> Result<()> {
        self.inputs.dedup();
        let manifest = Manifest {
            command,
            version: env!("CARGO_PKG_VERSION"),
            seed,
            flags,
            inputs: &self.inputs,
            outputs: &self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        write_text(&self.out.join(format!("{command}.manifest.json")), &text)
    }
}
