//! `.qnt` files: JSON header line followed by the `P × m` centroid block as
//! float64 little-endian, row-major.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{grid_parameter, Codebook, MapKind, Method, T2Map};
use crate::error::{Error, Result};
use crate::format::{read_artifact, write_artifact};

const FORMAT: &str = "qnt/1";

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    m: usize,
    #[serde(rename = "P")]
    p: usize,
    map: MapKind,
    lambdas: Vec<f64>,
    method: Method,
    seed: u64,
    s: Option<f64>,
}

impl Codebook {
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = Header {
            format: FORMAT.into(),
            m: self.dim(),
            p: self.len(),
            map: self.t2.kind(),
            lambdas: self.t2.lambdas().to_vec(),
            method: self.method,
            seed: self.seed,
            s: (self.method == Method::Grid).then(grid_parameter),
        };
        write_artifact(path, &header, &[&self.centroids])
    }

    pub fn load(path: &Path) -> Result<Self> {
        let (header, values): (Header, _) = read_artifact(path)?;
        if header.format != FORMAT {
            return Err(Error::InvalidFormat(format!("expected {FORMAT}, found {}", header.format)));
        }
        if header.lambdas.len() != header.m || values.len() != header.p * header.m {
            return Err(Error::InvalidFormat("centroid block does not match the header".into()));
        }
        let t2 = T2Map::new(header.map, header.lambdas)?;
        let rows = if header.m == 0 {
            vec![Vec::new(); header.p]
        } else {
            values.chunks_exact(header.m).map(<[f64]>::to_vec).collect()
        };
        Codebook::new(rows, t2, header.method, header.seed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::grid_codebook;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let t2 = T2Map::new(MapKind::ScaledCdf, vec![0.5, 0.25]).unwrap();
        let grid = grid_codebook(&t2).unwrap();
        let path = dir.path().join("g.qnt");
        grid.save(&path).unwrap();
        assert_eq!(Codebook::load(&path).unwrap(), grid);
        let text = std::fs::read(&path).unwrap();
        let header: serde_json::Value =
            serde_json::from_slice(&text[..text.iter().position(|&b| b == b'\n').unwrap()]).unwrap();
        assert_eq!(header["P"], 5);
        assert_eq!(header["map"], "scaled_cdf");
        assert_eq!(header["method"], "grid");
        assert!(header["s"].as_f64().is_some());

        let book =
            Codebook::new(vec![vec![1.0], vec![-2.0]], T2Map::new(MapKind::Scale, vec![2.0]).unwrap(), Method::Clvq, 9)
                .unwrap();
        book.save(&path).unwrap();
        assert_eq!(Codebook::load(&path).unwrap(), book);
        assert!(matches!(Codebook::load(&dir.path().join("x.qnt")), Err(Error::ArtifactNotFound(_))));
    }
}
