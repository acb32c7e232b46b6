use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

/// Every file a command reads, in reading order.
#[derive(Debug, Default)]
pub struct Inputs {
    digests: Vec<InputDigest>,
}

impl Inputs {
    pub fn read(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.digests.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(bytes)
    }

    pub fn read_string(&mut self, path: &Path) -> Result<String> {
        String::from_utf8(self.read(path)?).with_context(|| format!("{} is not UTF-8", path.display()))
    }
}

/// Envelope shared by all subcommands. No timestamps, so identical runs
/// produce identical bytes.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'a str,
    seed: u64,
    inputs: &'a [InputDigest],
    result: &'a T,
}

pub struct Output {
    pub json: String,
    pub text: String,
    /// Extra files written next to the reports, relative to the output directory.
    pub artifacts: Vec<(PathBuf, Vec<u8>)>,
}

pub fn render<T: Serialize>(command: &str, seed: u64, inputs: &Inputs, result: &T, text: String) -> Result<Output> {
    let env = Envelope {
        tool: "minefit",
        version: env!("CARGO_PKG_VERSION"),
        command,
        seed,
        inputs: &inputs.digests,
        result,
    };
    let mut json = serde_json::to_string_pretty(&env)?;
    json.push('\n');
    Ok(Output {
        json,
        text,
        artifacts: Vec::new(),
    })
}

pub fn write_all(dir: &Path, command: &str, out: &Output) -> Result<()> {
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let put = |name: &Path, bytes: &[u8]| {
        let p = dir.join(name);
        std::fs::write(&p, bytes).with_context(|| format!("writing {}", p.display()))
    };
    put(Path::new(&format!("{command}.json")), out.json.as_bytes())?;
    put(Path::new(&format!("{command}.txt")), out.text.as_bytes())?;
    for (name, bytes) in &out.artifacts {
        put(name, bytes)?;
    }
    Ok(())
}
