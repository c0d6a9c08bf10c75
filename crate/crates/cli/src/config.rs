use std::path::Path;

use harmonic_rmt::ensembles::PolyaWeight;
use harmonic_rmt::montecarlo::XSource;
use harmonic_rmt::numerics::QuadratureConfig;
use harmonic_rmt::products::{CoreMethod, ProductSpec, RankBranch};
use num_complex::Complex64 as C64;
use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

/// Contents of a `--spec` file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecFile {
    pub version: u32,
    pub product: ProductSpec,
    pub x: XSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch: Option<RankBranch>,
    #[serde(default)]
    pub method: CoreMethod,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<Tolerance>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl SpecFile {
    pub fn branch(&self) -> RankBranch {
        self.branch.unwrap_or_else(|| self.product.natural_branch())
    }

    pub fn quadrature(&self, abs: Option<f64>, rel: Option<f64>) -> Result<QuadratureConfig, CliError> {
        let base = QuadratureConfig::default();
        let t = self.tolerance.unwrap_or(Tolerance {
            abs: base.abs_tol,
            rel: base.rel_tol,
        });
        let (abs, rel) = (abs.unwrap_or(t.abs), rel.unwrap_or(t.rel));
        if !(abs > 0.0 && rel > 0.0) {
            return Err(CliError::Usage(format!(
                "tolerances must be positive, got abs = {abs}, rel = {rel}"
            )));
        }
        Ok(QuadratureConfig::with_tol(abs, rel))
    }
}

/// Parses JSON given inline (leading `{`) or as a file path, naming the offending field on error.
pub fn load_json<T: DeserializeOwned>(arg: &str, what: &str) -> Result<T, CliError> {
    let text = if arg.trim_start().starts_with('{') {
        arg.to_string()
    } else {
        std::fs::read_to_string(Path::new(arg)).map_err(|e| CliError::Usage(format!("cannot read {what} {arg}: {e}")))?
    };
    let de = &mut serde_json::Deserializer::from_str(&text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            CliError::Usage(format!("{what}: {}", e.inner()))
        } else {
            CliError::Usage(format!("{what}: field `{path}`: {}", e.inner()))
        }
    })
}

pub fn load_spec(arg: &str) -> Result<SpecFile, CliError> {
    let spec: SpecFile = load_json(arg, "spec")?;
    if spec.version != SCHEMA_VERSION {
        return Err(CliError::Usage(format!(
            "spec: field `version`: unsupported schema version {}, expected {SCHEMA_VERSION}",
            spec.version
        )));
    }
    spec.product
        .validate()
        .map_err(|e| CliError::Usage(format!("spec: field `product`: {e}")))?;
    Ok(spec)
}

pub fn load_weight(arg: &str) -> Result<PolyaWeight, CliError> {
    let w: PolyaWeight = load_json(arg, "weight")?;
    w.validate().map_err(|e| CliError::Usage(format!("weight: {e}")))?;
    Ok(w)
}

/// Inclusive grid `min:max:points`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Grid {
    pub min: f64,
    pub max: f64,
    pub points: usize,
}

impl Grid {
    pub fn parse(s: &str) -> Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [min, max, points] = parts[..] else {
            return Err(format!("grid `{s}` must have the form min:max:points"));
        };
        let min: f64 = min.trim().parse().map_err(|_| format!("grid minimum `{min}` is not a number"))?;
        let max: f64 = max.trim().parse().map_err(|_| format!("grid maximum `{max}` is not a number"))?;
        let points: usize = points
            .trim()
            .parse()
            .map_err(|_| format!("grid point count `{points}` is not a positive integer"))?;
        if !min.is_finite() || !max.is_finite() {
            return Err(format!("grid `{s}` has non-finite bounds"));
        }
        if points == 0 {
            return Err("grid needs at least one point".into());
        }
        if points > 1 && min >= max {
            return Err(format!("grid `{s}` is not increasing"));
        }
        Ok(Self { min, max, points })
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.min];
        }
        let h = (self.max - self.min) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| if i + 1 == self.points { self.max } else { self.min + h * i as f64 })
            .collect()
    }
}

/// Real or complex number: `2`, `-0.5`, `1+2i`, `3.5e-1-1i`, `2i`.
pub fn parse_complex(s: &str) -> Result<C64, String> {
    let t = s.trim();
    let bad = || format!("`{s}` is not a real or complex number");
    let Some(body) = t.strip_suffix('i') else {
        return t.parse::<f64>().map(|re| C64::new(re, 0.0)).map_err(|_| bad());
    };
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
    let imag = |x: &str| -> Result<f64, String> {
        match x {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => x.parse().map_err(|_| bad()),
        }
    };
    match split {
        Some(k) => Ok(C64::new(body[..k].parse().map_err(|_| bad())?, imag(&body[k..])?)),
        None => Ok(C64::new(0.0, imag(body)?)),
    }
}

pub fn parse_list<T>(s: &str, item: impl Fn(&str) -> Result<T, String>) -> Result<Vec<T>, String> {
    if s.trim().is_empty() {
        return Ok(Vec::new());
    }
    s.split(',').map(|x| item(x.trim())).collect()
}

pub fn parse_reals(s: &str) -> Result<Vec<f64>, String> {
    parse_list(s, |x| x.parse::<f64>().map_err(|_| format!("`{x}` is not a number")))
}

pub fn parse_complexes(s: &str) -> Result<Vec<C64>, String> {
    parse_list(s, parse_complex)
}

pub fn parse_parities(s: &str) -> Result<Vec<u8>, String> {
    parse_list(s, |x| x.parse::<u8>().map_err(|_| format!("`{x}` is not a non-negative integer")))
}

/// Same syntax as [`parse_complex`] accepts; drops a vanishing imaginary part.
pub fn format_complex(z: C64) -> String {
    if z.im == 0.0 {
        format!("{}", z.re)
    } else if z.im < 0.0 {
        format!("{}-{}i", z.re, -z.im)
    } else {
        format!("{}+{}i", z.re, z.im)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_endpoints_and_count() {
        let g = Grid::parse("-5:5:200").unwrap();
        let v = g.values();
        assert_eq!(v.len(), 200);
        assert_eq!((v[0], v[199]), (-5.0, 5.0));
        assert!(v.windows(2).all(|w| w[1] > w[0]));
        assert!(Grid::parse("1:0:3").is_err());
        assert!(Grid::parse("0:1").is_err());
        assert!(Grid::parse("0:1:0").is_err());
    }

    #[test]
    fn complex_syntax() {
        assert_eq!(parse_complex("2").unwrap(), C64::new(2.0, 0.0));
        assert_eq!(parse_complex("1+2i").unwrap(), C64::new(1.0, 2.0));
        assert_eq!(parse_complex("-1.5e-1-0.5i").unwrap(), C64::new(-0.15, -0.5));
        assert_eq!(parse_complex("1e+2+1e-1i").unwrap(), C64::new(100.0, 0.1));
        assert_eq!(parse_complex("-i").unwrap(), C64::new(0.0, -1.0));
        assert_eq!(parse_complex("3i").unwrap(), C64::new(0.0, 3.0));
        assert!(parse_complex("x").is_err());
        for z in [C64::new(1.5, 0.0), C64::new(-1.0, 0.25), C64::new(0.5, -3.0)] {
            assert_eq!(parse_complex(&format_complex(z)).unwrap(), z);
        }
    }

    #[test]
    fn spec_rejects_unknown_fields_by_name() {
        let text = r#"{"version":1,"product":{"l":2,"m":2,"n1":2,"n2":1,"omega":{"kind":"ginibre","nu":0,"mu":1}},"x":{"kind":"fixed","a":[1.0]}}"#;
        let err = load_spec(text).unwrap_err().to_string();
        assert!(err.contains("product.omega") && err.contains("mu"), "{err}");
        let text = r#"{"version":2,"product":{"l":2,"m":2,"n1":2,"n2":1,"omega":{"kind":"ginibre","nu":0}},"x":{"kind":"gue"}}"#;
        assert!(load_spec(text).unwrap_err().to_string().contains("version"));
    }
}
