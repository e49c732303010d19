use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_prior::{Domain, GridSpec};
use crate::mechanism_core::table::{validate_lottery, LotteryEntry, MechanismTable};
use crate::scalar::{parse_rational, Scalar};

pub const FORMAT: &str = "mechlearn-mechanism";

/// Metadata stored alongside a mechanism. Optional fields are omitted when empty.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<String>,
    /// Incentive slack the mechanism was built for.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_hash: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_version: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    format: String,
    n: usize,
    m: usize,
    epsilon: f64,
    h: f64,
    outcome_count: usize,
    outcome_space_hash: String,
    scalar: String,
    #[serde(default)]
    provenance: Provenance,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryFile {
    p: String,
    outcome: usize,
    payments: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RowFile {
    profile: Vec<u32>,
    lottery: Vec<EntryFile>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MechanismFile {
    header: Header,
    domain: Vec<Vec<u32>>,
    rows: Vec<RowFile>,
}

fn decode<T: Scalar>(s: &str, location: &str) -> Result<T> {
    T::decode(s)
        .or_else(|| parse_rational(s).map(|r| T::from_rational(&r)))
        .ok_or_else(|| Error::parse(location, format!("cannot parse number {s:?}")))
}

impl<T: Scalar> MechanismTable<T> {
    pub fn to_json_string(&self, provenance: &Provenance) -> Result<String> {
        let file = MechanismFile {
            header: Header {
                format: FORMAT.into(),
                n: self.n(),
                m: self.m(),
                epsilon: self.grid().epsilon(),
                h: self.grid().h(),
                outcome_count: self.outcome_count(),
                outcome_space_hash: self.outcome_hash().to_string(),
                scalar: T::NAME.into(),
                provenance: provenance.clone(),
            },
            domain: self.domain().coords().to_vec(),
            rows: self
                .rows()
                .iter()
                .enumerate()
                .map(|(r, lottery)| RowFile {
                    profile: self.domain().profile_at(r),
                    lottery: lottery
                        .iter()
                        .map(|e| EntryFile {
                            p: e.prob.encode(),
                            outcome: e.outcome,
                            payments: e.payments.iter().map(Scalar::encode).collect(),
                        })
                        .collect(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&file)?;
        text.push('\n');
        Ok(text)
    }

    pub fn write_json<W: Write>(&self, mut writer: W, provenance: &Provenance) -> Result<()> {
        writer.write_all(self.to_json_string(provenance)?.as_bytes())?;
        Ok(())
    }

    pub fn from_json_str(text: &str) -> Result<(Self, Provenance)> {
        let file: MechanismFile =
            serde_json::from_str(text).map_err(|e| Error::parse(format!("line {}", e.line()), e.to_string()))?;
        let header = file.header;
        if header.format != FORMAT {
            return Err(Error::parse("header", format!("unknown format {:?}", header.format)));
        }
        let grid = GridSpec::new(header.epsilon, header.h).map_err(|e| Error::parse("header", e.to_string()))?;
        let domain =
            Domain::new(header.n, header.m, file.domain).map_err(|e| Error::parse("domain", e.to_string()))?;
        if file.rows.len() != domain.profile_count() {
            return Err(Error::parse(
                "rows",
                format!("expected {} rows, found {}", domain.profile_count(), file.rows.len()),
            ));
        }
        let mut rows = vec![None; file.rows.len()];
        for (k, row) in file.rows.into_iter().enumerate() {
            let location = format!("row {k} (profile {:?})", row.profile);
            let index = domain
                .row_index(&row.profile)
                .ok_or_else(|| Error::parse(&location, "profile outside the domain"))?;
            if rows[index].is_some() {
                return Err(Error::parse(&location, "duplicate profile"));
            }
            let mut lottery = Vec::with_capacity(row.lottery.len());
            for e in row.lottery {
                lottery.push(LotteryEntry {
                    prob: decode::<T>(&e.p, &location)?,
                    outcome: e.outcome,
                    payments: e.payments.iter().map(|p| decode::<T>(p, &location)).collect::<Result<_>>()?,
                });
            }
            validate_lottery(&lottery, header.n, header.outcome_count, &location)?;
            rows[index] = Some(lottery);
        }
        let rows = rows.into_iter().map(|r| r.expect("every row placed")).collect();
        let table = MechanismTable::with_hash(grid, domain, header.outcome_count, header.outcome_space_hash, rows)?;
        Ok((table, header.provenance))
    }

    pub fn read_json<R: Read>(mut reader: R) -> Result<(Self, Provenance)> {
        let mut text = String::new();
        reader.read_to_string(&mut text)?;
        Self::from_json_str(&text)
    }
}
