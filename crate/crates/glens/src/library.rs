//! Icon and background assets on disk.
//!
//! An icon directory holds `index.json` mapping icon ids to a display name
//! and a PNG file:
//!
//! ```json
//! { "gear": { "name": "settings gear", "file": "gear.png" } }
//! ```
//!
//! A background directory is any directory of PNG files. They are used at
//! their native size, in file-name order.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use glens_core::scenegen::synth::{builtin_library, synthetic_background};
use glens_core::scenegen::{IconAsset, IconLibrary};
use glens_core::{PixelDims, Raster};
use serde::Deserialize;

use crate::error::{GlensError, Result};
use crate::io::{read_json, read_png};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct IndexEntry {
    name: String,
    file: PathBuf,
}

pub fn load_icon_library(dir: &Path) -> Result<IconLibrary> {
    let index: BTreeMap<String, IndexEntry> = read_json(&dir.join("index.json"))?;
    let mut icons = Vec::with_capacity(index.len());
    for (id, entry) in index {
        let image = read_png(&dir.join(&entry.file))?;
        icons.push(IconAsset::new(id, entry.name, image)?);
    }
    Ok(IconLibrary::new(icons)?)
}

/// Where scene backgrounds come from.
#[derive(Debug, Clone)]
pub enum Backgrounds {
    /// Seeded gradients at a fixed size.
    Synthetic(PixelDims),
    Files(Vec<PathBuf>),
}

impl Backgrounds {
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| GlensError::io(dir, e))? {
            let path = entry.map_err(|e| GlensError::io(dir, e))?.path();
            if path.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")) {
                files.push(path);
            }
        }
        if files.is_empty() {
            return Err(GlensError::Config(format!("{}: no PNG backgrounds", dir.display())));
        }
        files.sort();
        Ok(Backgrounds::Files(files))
    }

    /// The background for the `index`-th scene and the reference recorded in
    /// its manifest.
    pub fn pick(&self, index: usize, seed: u64) -> Result<(String, Raster)> {
        match self {
            Backgrounds::Synthetic(dims) => Ok((format!("synthetic:{seed}"), synthetic_background(*dims, seed))),
            Backgrounds::Files(files) => {
                let path = &files[index % files.len()];
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                Ok((name, read_png(path)?))
            }
        }
    }
}

pub fn icon_library_or_builtin(dir: Option<&Path>) -> Result<IconLibrary> {
    match dir {
        Some(d) => load_icon_library(d),
        None => Ok(builtin_library()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::write_png;

    #[test]
    fn loads_index_and_pngs() {
        let dir = tempfile::tempdir().unwrap();
        let img = Raster::filled(PixelDims::new(4, 4).unwrap(), [255, 0, 0, 255]);
        write_png(&dir.path().join("a.png"), &img).unwrap();
        fs::write(dir.path().join("index.json"), r#"{"red": {"name": "red square", "file": "a.png"}}"#).unwrap();
        let lib = load_icon_library(dir.path()).unwrap();
        assert_eq!(lib.len(), 1);
        assert_eq!(lib.get("red").unwrap().name, "red square");
        assert_eq!(lib.get("red").unwrap().image, img);
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("index.json"), r#"{"x": {"name": "x", "file": "gone.png"}}"#).unwrap();
        assert!(load_icon_library(dir.path()).is_err());
    }

    #[test]
    fn backgrounds_cycle_in_name_order() {
        let dir = tempfile::tempdir().unwrap();
        for (n, c) in [("b.png", 2u8), ("a.png", 1)] {
            write_png(&dir.path().join(n), &Raster::filled(PixelDims::new(3, 2).unwrap(), [c, c, c, 255])).unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let bg = Backgrounds::from_dir(dir.path()).unwrap();
        assert_eq!(bg.pick(0, 9).unwrap().0, "a.png");
        assert_eq!(bg.pick(3, 9).unwrap().0, "b.png");
    }
}
