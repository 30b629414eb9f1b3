//! Per-run output directory: `transcript.json` plus
//! `iter_<k>/{program.json, validation.json, view_<dir>.ppm}`.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use crate::render::{encode_ppm, Image, ViewDirection};
use crate::validators::ValidationReport;

use super::Exchange;

#[derive(Debug, Clone)]
pub struct RunDir {
    root: PathBuf,
}

impl RunDir {
    pub fn create(root: &Path) -> io::Result<RunDir> {
        fs::create_dir_all(root)?;
        Ok(RunDir {
            root: root.to_path_buf(),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn iteration_dir(&self, k: usize) -> io::Result<PathBuf> {
        let d = self.root.join(format!("iter_{k}"));
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    pub fn write_program(&self, k: usize, source: &str) -> io::Result<()> {
        fs::write(self.iteration_dir(k)?.join("program.json"), source)
    }

    pub fn write_validation(&self, k: usize, report: &ValidationReport) -> io::Result<()> {
        let text = serde_json::to_string_pretty(report).map_err(io::Error::other)?;
        fs::write(self.iteration_dir(k)?.join("validation.json"), text)
    }

    pub fn write_views(&self, k: usize, views: &[(ViewDirection, Image)]) -> io::Result<()> {
        let d = self.iteration_dir(k)?;
        for (dir, img) in views {
            fs::write(d.join(format!("view_{}.ppm", dir.tag())), encode_ppm(img))?;
        }
        Ok(())
    }

    pub fn write_transcript(&self, transcript: &[Exchange]) -> io::Result<()> {
        let text = serde_json::to_string_pretty(transcript).map_err(io::Error::other)?;
        fs::write(self.root.join("transcript.json"), text)
    }
}
