use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use sha2::{Digest, Sha256};

use super::committee::Committee;
use super::qbc::Qoi;
use crate::error::{invalid, Error, Result};
use crate::hydro::{FrequencyGrid, OneBodyOutputs, WecGeometry};
use crate::mbe::{HydroSource, PairTerms};

/// Format version of bundle files. Files with a different major version are
/// rejected.
pub const BUNDLE_VERSION: &str = "1.0.0";

/// All ten committees plus the grid they were trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurrogateBundle {
    pub grid: FrequencyGrid,
    /// Identifier of the oracle the committees were trained against.
    pub trained_on: String,
    /// Committees in `Qoi::ONE_BODY` then `Qoi::TWO_BODY` order.
    pub committees: Vec<Committee>,
}

#[derive(Serialize)]
struct EnvelopeOut<'a> {
    version: &'a str,
    checksum: String,
    payload: &'a RawValue,
}

#[derive(Deserialize)]
struct EnvelopeIn<'a> {
    version: String,
    checksum: String,
    #[serde(borrow)]
    payload: &'a RawValue,
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn major(v: &str) -> &str {
    v.split('.').next().unwrap_or(v)
}

impl SurrogateBundle {
    pub fn new(grid: FrequencyGrid, trained_on: String, committees: Vec<Committee>) -> Result<Self> {
        let expected: Vec<&str> = Qoi::ONE_BODY.iter().chain(&Qoi::TWO_BODY).map(|q| q.tag()).collect();
        let found: Vec<&str> = committees.iter().map(|c| c.tag.as_str()).collect();
        if found != expected {
            return Err(invalid(format!("bundle committees must be {expected:?}, got {found:?}")));
        }
        if committees.iter().any(|c| c.spec.outputs != grid.len()) {
            return Err(Error::GridMismatch("committee output width differs from the grid".into()));
        }
        Ok(Self {
            grid,
            trained_on,
            committees,
        })
    }

    pub fn committee(&self, qoi: Qoi) -> &Committee {
        self.committees
            .iter()
            .find(|c| c.tag == qoi.tag())
            .expect("bundle holds every quantity")
    }

    pub fn to_json(&self) -> Result<String> {
        let payload = serde_json::to_string(self)?;
        let raw = RawValue::from_string(payload)?;
        Ok(serde_json::to_string(&EnvelopeOut {
            version: BUNDLE_VERSION,
            checksum: digest(raw.get()),
            payload: &raw,
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let env: EnvelopeIn = serde_json::from_str(text)?;
        if major(&env.version) != major(BUNDLE_VERSION) {
            return Err(Error::VersionMismatch {
                found: env.version,
                expected: BUNDLE_VERSION.to_string(),
            });
        }
        if digest(env.payload.get()) != env.checksum {
            return Err(Error::ChecksumMismatch);
        }
        let bundle: SurrogateBundle = serde_json::from_str(env.payload.get())?;
        Self::new(bundle.grid, bundle.trained_on, bundle.committees)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    fn row(m: &nalgebra::DMatrix<f64>, j: usize) -> Vec<f64> {
        m.column(j).iter().copied().collect()
    }
}

impl HydroSource for SurrogateBundle {
    fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    fn id(&self) -> String {
        format!("surrogate({})", self.trained_on)
    }

    fn one_body(&self, geom: &WecGeometry) -> Result<OneBodyOutputs> {
        let x = vec![vec![geom.radius, geom.slenderness]];
        let mut out = Qoi::ONE_BODY.iter().map(|q| Self::row(&self.committee(*q).predict(&x).mean, 0));
        Ok(OneBodyOutputs {
            a: out.next().expect("four outputs"),
            b: out.next().expect("four outputs"),
            fe_re: out.next().expect("four outputs"),
            fe_im: out.next().expect("four outputs"),
        })
    }

    fn pair_terms(&self, geom: &WecGeometry, l: f64, theta: f64) -> Result<PairTerms> {
        Ok(self.pair_terms_batch(geom, &[(l, theta)])?.remove(0))
    }

    fn pair_terms_batch(&self, geom: &WecGeometry, pairs: &[(f64, f64)]) -> Result<Vec<PairTerms>> {
        if pairs.iter().any(|(l, t)| !(*l > 0.0) || !(0.0..=std::f64::consts::PI).contains(t)) {
            return Err(invalid("pair separation must be positive and angle within [0, π]"));
        }
        let x: Vec<Vec<f64>> = pairs.iter().map(|&(l, t)| vec![geom.radius, geom.slenderness, l, t]).collect();
        let means: Vec<_> = Qoi::TWO_BODY.iter().map(|q| self.committee(*q).predict(&x).mean).collect();
        Ok((0..pairs.len())
            .map(|j| PairTerms {
                da11: Self::row(&means[0], j),
                da12: Self::row(&means[1], j),
                db11: Self::row(&means[2], j),
                db12: Self::row(&means[3], j),
                dfe_re: Self::row(&means[4], j),
                dfe_im: Self::row(&means[5], j),
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::surrogate::committee::{init_committee, NetSpec};
    use rand::Rng as _;

    fn bundle() -> SurrogateBundle {
        let grid = FrequencyGrid::uniform(0.3, 2.0, 7).unwrap();
        let committees = Qoi::ONE_BODY
            .iter()
            .chain(&Qoi::TWO_BODY)
            .enumerate()
            .map(|(i, q)| {
                let spec = NetSpec::new(q.space().dim(), grid.len());
                init_committee(q.tag(), spec, 3, i as u64).unwrap()
            })
            .collect();
        SurrogateBundle::new(grid, "toy-m0".into(), committees).unwrap()
    }

    #[test]
    fn round_trip_is_bitwise() {
        let b = bundle();
        let back = SurrogateBundle::from_json(&b.to_json().unwrap()).unwrap();
        assert_eq!(back, b);
        let mut r = rng::stream(3, 0);
        for _ in 0..100 {
            let g = WecGeometry::unchecked(r.random_range(0.5..10.0), r.random_range(0.5..2.0));
            let (l, t) = (r.random_range(1.0..1000.0), r.random_range(0.0..3.14));
            assert_eq!(b.one_body(&g).unwrap(), back.one_body(&g).unwrap());
            assert_eq!(b.pair_terms(&g, l, t).unwrap(), back.pair_terms(&g, l, t).unwrap());
        }
    }

    #[test]
    fn batch_matches_single() {
        let b = bundle();
        let g = WecGeometry::unchecked(2.0, 1.0);
        let pairs = [(10.0, 0.1), (50.0, 2.0), (400.0, 3.0)];
        let batch = b.pair_terms_batch(&g, &pairs).unwrap();
        for (p, t) in pairs.iter().zip(&batch) {
            let single = b.pair_terms(&g, p.0, p.1).unwrap();
            for (x, y) in single.da12.iter().zip(&t.da12) {
                assert!((x - y).abs() <= 1e-12 * x.abs().max(1e-12));
            }
        }
    }

    #[test]
    fn corrupted_payload_fails_checksum() {
        let text = bundle().to_json().unwrap();
        let at = text.find("\"trained_on\":\"toy").unwrap() + 14;
        let mut bad = text.clone();
        bad.replace_range(at..at + 3, "tot");
        assert!(matches!(SurrogateBundle::from_json(&bad), Err(Error::ChecksumMismatch)));
    }

    #[test]
    fn version_mismatch_rejected() {
        let text = bundle().to_json().unwrap().replacen("\"1.0.0\"", "\"2.0.0\"", 1);
        assert!(matches!(SurrogateBundle::from_json(&text), Err(Error::VersionMismatch { .. })));
    }

    #[test]
    fn wrong_committee_set_rejected() {
        let b = bundle();
        let mut c = b.committees.clone();
        c.swap(0, 1);
        assert!(SurrogateBundle::new(b.grid.clone(), b.trained_on.clone(), c).is_err());
    }
}
