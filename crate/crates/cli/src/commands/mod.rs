pub mod evaluate;
pub mod predict;
pub mod preprocess;
pub mod train;
pub mod visualize;

use dimshrink_core::{Error, Result};

/// Parse a `WxHxD` dimension triple, e.g. `192x160x108`.
pub fn parse_dims(s: &str) -> std::result::Result<[usize; 3], String> {
    let parts: Vec<&str> = s.split(['x', 'X']).collect();
    if parts.len() != 3 {
        return Err(format!("expected WxHxD, got {s:?}"));
    }
    let mut dims = [0usize; 3];
    for (out, part) in dims.iter_mut().zip(&parts) {
        *out = part
            .parse()
            .map_err(|_| format!("invalid dimension {part:?} in {s:?}"))?;
    }
    Ok(dims)
}

/// Strip a `.nii` / `.nii.gz` extension; `None` for other files.
pub fn nifti_stem(name: &str) -> Option<&str> {
    name.strip_suffix(".nii.gz")
        .or_else(|| name.strip_suffix(".nii"))
}

pub fn create_dir(path: &std::path::Path) -> Result<()> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::Config(format!("cannot create {}: {e}", path.display())))
}
