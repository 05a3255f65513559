use std::fmt;
use std::str::FromStr;

use super::FormatError;

pub const RESULTS_HEADER: [&str; 8] = [
    "instance_id",
    "algorithm",
    "value",
    "joint_actions_evaluated",
    "nodes_pruned",
    "decouple_events",
    "wall_time_ms",
    "status",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Algorithm {
    Core,
    CrgPs,
    Dp,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Core, Algorithm::CrgPs, Algorithm::Dp];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Core => "core",
            Algorithm::CrgPs => "crg-ps",
            Algorithm::Dp => "dp",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Algorithm {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown algorithm {s:?}, expected core, crg-ps or dp"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Solved,
    Timeout,
    /// A state or memory budget ran out.
    Resource,
}

impl RunStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RunStatus::Solved => "solved",
            RunStatus::Timeout => "timeout",
            RunStatus::Resource => "resource",
        }
    }
}

impl FromStr for RunStatus {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        [RunStatus::Solved, RunStatus::Timeout, RunStatus::Resource]
            .into_iter()
            .find(|r| r.as_str() == s)
            .ok_or_else(|| format!("unknown status {s:?}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub instance_id: String,
    pub algorithm: Algorithm,
    /// Only solved rows carry a value.
    pub value: Option<f64>,
    pub joint_actions_evaluated: u64,
    pub nodes_pruned: u64,
    pub decouple_events: u64,
    pub wall_time_ms: u64,
    pub status: RunStatus,
}

/// CSV with a fixed header, rows ordered by instance id then algorithm.
pub fn write_results(rows: &[ResultRow]) -> String {
    let mut sorted: Vec<&ResultRow> = rows.iter().collect();
    sorted.sort_by(|a, b| (&a.instance_id, a.algorithm).cmp(&(&b.instance_id, b.algorithm)));
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(RESULTS_HEADER).expect("writing to memory");
    for r in sorted {
        let value = match (r.status, r.value) {
            (RunStatus::Solved, Some(v)) => v.to_string(),
            _ => String::new(),
        };
        w.write_record([
            r.instance_id.as_str(),
            r.algorithm.as_str(),
            &value,
            &r.joint_actions_evaluated.to_string(),
            &r.nodes_pruned.to_string(),
            &r.decouple_events.to_string(),
            &r.wall_time_ms.to_string(),
            r.status.as_str(),
        ])
        .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("input was UTF-8")
}

pub fn read_results(text: &str) -> Result<Vec<ResultRow>, FormatError> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header = r.headers().map_err(|e| FormatError::Csv(e.to_string()))?;
    if header.iter().ne(RESULTS_HEADER) {
        return Err(FormatError::Csv(format!("unexpected header {:?}", header)));
    }
    let mut rows = Vec::new();
    for (line, record) in r.records().enumerate() {
        let record = record.map_err(|e| FormatError::Csv(e.to_string()))?;
        let bad = |field: &str, e: String| FormatError::Csv(format!("row {}: {field}: {e}", line + 1));
        let int = |k: usize| record[k].parse::<u64>().map_err(|e| bad(RESULTS_HEADER[k], e.to_string()));
        let value = match &record[2] {
            "" => None,
            v => Some(v.parse::<f64>().map_err(|e| bad("value", e.to_string()))?),
        };
        rows.push(ResultRow {
            instance_id: record[0].to_string(),
            algorithm: record[1].parse().map_err(|e| bad("algorithm", e))?,
            value,
            joint_actions_evaluated: int(3)?,
            nodes_pruned: int(4)?,
            decouple_events: int(5)?,
            wall_time_ms: int(6)?,
            status: record[7].parse().map_err(|e| bad("status", e))?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(id: &str, algorithm: Algorithm, status: RunStatus, value: Option<f64>) -> ResultRow {
        ResultRow {
            instance_id: id.into(),
            algorithm,
            value,
            joint_actions_evaluated: 12,
            nodes_pruned: 3,
            decouple_events: 1,
            wall_time_ms: 7,
            status,
        }
    }

    #[test]
    fn empty_is_header_only() {
        assert_eq!(write_results(&[]), format!("{}\n", RESULTS_HEADER.join(",")));
    }

    #[test]
    fn solved_row_has_value() {
        let text = write_results(&[row("a", Algorithm::Dp, RunStatus::Solved, Some(15.5))]);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "a,dp,15.5,12,3,1,7,solved");
    }

    #[test]
    fn timeout_row_has_no_value() {
        let text = write_results(&[row("a", Algorithm::Core, RunStatus::Timeout, Some(1.0))]);
        assert_eq!(text.lines().nth(1).unwrap(), "a,core,,12,3,1,7,timeout");
    }

    #[test]
    fn rows_sorted_and_quoted() {
        let rows = vec![
            row("b", Algorithm::Core, RunStatus::Solved, Some(1.0)),
            row("a,1", Algorithm::Dp, RunStatus::Resource, None),
            row("a,1", Algorithm::Core, RunStatus::Solved, Some(-2.25)),
        ];
        let text = write_results(&rows);
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[1], "\"a,1\",core,-2.25,12,3,1,7,solved");
        assert_eq!(lines[2], "\"a,1\",dp,,12,3,1,7,resource");
        assert_eq!(read_results(&text).unwrap().len(), 3);
        assert_eq!(read_results(&text).unwrap()[0], rows[2]);
    }
}
