//! JSON file formats for environments, trajectories, distributions,
//! utilities, and policies. All on-disk numbers are `f64`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::mdp::{Labels, Mdp, Trajectory};
use crate::planner::EnlargedPolicy;
use crate::returns::{DemoDataset, ReturnDistribution};
use crate::utility::Utility;

fn schema_err(path: &Path, detail: impl Into<String>) -> Error {
    Error::Schema {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

/// Environment file: transitions indexed stage-major, then state, action,
/// next state; rewards stage-major, then state, action.
#[derive(Debug, Serialize, Deserialize)]
pub struct MdpFile {
    #[serde(rename = "S")]
    pub num_states: usize,
    #[serde(rename = "A")]
    pub num_actions: usize,
    #[serde(rename = "H")]
    pub horizon: usize,
    pub s0: usize,
    pub p: Vec<Vec<Vec<Vec<f64>>>>,
    pub r: Vec<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<Labels>,
}

impl MdpFile {
    pub fn from_mdp(mdp: &Mdp<f64>) -> Self {
        let (s, a, h) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
        let p = (1..=h)
            .map(|hh| {
                (0..s)
                    .map(|ss| {
                        (0..a)
                            .map(|aa| mdp.transition_row(hh, ss, aa).to_vec())
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let r = (1..=h)
            .map(|hh| {
                (0..s)
                    .map(|ss| (0..a).map(|aa| mdp.reward(hh, ss, aa)).collect())
                    .collect()
            })
            .collect();
        Self {
            num_states: s,
            num_actions: a,
            horizon: h,
            s0: mdp.initial_state(),
            p,
            r,
            labels: mdp.labels().cloned(),
        }
    }

    pub fn into_mdp(self, path: &Path) -> Result<Mdp<f64>> {
        let (s, a, h) = (self.num_states, self.num_actions, self.horizon);
        let mut p = Vec::with_capacity(h * s * a * s);
        if self.p.len() != h {
            return Err(schema_err(path, format!("p has {} stages, expected {h}", self.p.len())));
        }
        for (hi, stage) in self.p.into_iter().enumerate() {
            if stage.len() != s {
                return Err(schema_err(path, format!("p[{hi}] has {} states, expected {s}", stage.len())));
            }
            for (si, per_state) in stage.into_iter().enumerate() {
                if per_state.len() != a {
                    return Err(schema_err(
                        path,
                        format!("p[{hi}][{si}] has {} actions, expected {a}", per_state.len()),
                    ));
                }
                for (ai, row) in per_state.into_iter().enumerate() {
                    if row.len() != s {
                        return Err(schema_err(
                            path,
                            format!("p[{hi}][{si}][{ai}] has {} entries, expected {s}", row.len()),
                        ));
                    }
                    p.extend(row);
                }
            }
        }
        let mut r = Vec::with_capacity(h * s * a);
        if self.r.len() != h {
            return Err(schema_err(path, format!("r has {} stages, expected {h}", self.r.len())));
        }
        for (hi, stage) in self.r.into_iter().enumerate() {
            if stage.len() != s {
                return Err(schema_err(path, format!("r[{hi}] has {} states, expected {s}", stage.len())));
            }
            for row in stage {
                if row.len() != a {
                    return Err(schema_err(path, format!("a reward row has {} entries, expected {a}", row.len())));
                }
                r.extend(row);
            }
        }
        Mdp::new(s, a, h, self.s0, p, r, self.labels)
            .map_err(|e| schema_err(path, e.to_string()))
    }
}

pub fn load_mdp(path: &Path) -> Result<Mdp<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file: MdpFile =
        serde_json::from_str(&text).map_err(|e| schema_err(path, e.to_string()))?;
    file.into_mdp(path)
}

pub fn save_mdp(mdp: &Mdp<f64>, path: &Path) -> Result<()> {
    let text = serde_json::to_string_pretty(&MdpFile::from_mdp(mdp))?;
    std::fs::write(path, text)?;
    Ok(())
}

/// Trajectory file: each trajectory is `H` `[state, action]` pairs followed
/// by the terminal state.
pub fn save_trajectories(demos: &DemoDataset, path: &Path) -> Result<()> {
    let trajs: Vec<Vec<serde_json::Value>> = demos
        .trajectories
        .iter()
        .map(|t| {
            let mut row: Vec<serde_json::Value> = t
                .steps
                .iter()
                .map(|&(s, a)| serde_json::json!([s, a]))
                .collect();
            row.push(serde_json::json!(t.terminal_state));
            row
        })
        .collect();
    let text = serde_json::to_string(&serde_json::json!({ "trajs": trajs }))?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_trajectories(path: &Path, env_id: usize) -> Result<DemoDataset> {
    let text = std::fs::read_to_string(path)?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| schema_err(path, e.to_string()))?;
    let trajs = value
        .get("trajs")
        .and_then(|t| t.as_array())
        .ok_or_else(|| schema_err(path, "missing \"trajs\" array"))?;
    let mut out = Vec::with_capacity(trajs.len());
    for (i, row) in trajs.iter().enumerate() {
        let row = row
            .as_array()
            .ok_or_else(|| schema_err(path, format!("trajs[{i}] is not an array")))?;
        if row.len() < 2 {
            return Err(schema_err(path, format!("trajs[{i}] too short")));
        }
        let mut steps = Vec::with_capacity(row.len() - 1);
        for step in &row[..row.len() - 1] {
            let pair = step
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| schema_err(path, format!("trajs[{i}] step is not [s, a]")))?;
            let s = pair[0]
                .as_u64()
                .ok_or_else(|| schema_err(path, "state is not an integer"))?;
            let a = pair[1]
                .as_u64()
                .ok_or_else(|| schema_err(path, "action is not an integer"))?;
            steps.push((s as usize, a as usize));
        }
        let terminal = row[row.len() - 1]
            .as_u64()
            .ok_or_else(|| schema_err(path, format!("trajs[{i}] terminal state is not an integer")))?;
        out.push(Trajectory {
            steps,
            terminal_state: terminal as usize,
        });
    }
    Ok(DemoDataset::new(env_id, out))
}

/// Return-distribution file.
#[derive(Debug, Serialize, Deserialize)]
pub struct ReturnDistributionFile {
    pub epsilon0: f64,
    #[serde(rename = "H")]
    pub horizon: f64,
    pub weights: Vec<f64>,
}

pub fn save_return_distribution(dist: &ReturnDistribution<f64>, path: &Path) -> Result<()> {
    let file = ReturnDistributionFile {
        epsilon0: dist.grid().epsilon0(),
        horizon: dist.grid().horizon() as f64,
        weights: dist.weights().to_vec(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_return_distribution(path: &Path) -> Result<ReturnDistribution<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file: ReturnDistributionFile =
        serde_json::from_str(&text).map_err(|e| schema_err(path, e.to_string()))?;
    let grid = Grid::new(file.epsilon0, file.horizon as usize)
        .map_err(|e| schema_err(path, e.to_string()))?;
    ReturnDistribution::new(grid, file.weights).map_err(|e| schema_err(path, e.to_string()))
}

/// Utility file: anchor pairs plus an optional Lipschitz bound.
#[derive(Debug, Serialize, Deserialize)]
pub struct UtilityFile {
    #[serde(rename = "H")]
    pub horizon: f64,
    pub anchors: Vec<(f64, f64)>,
    #[serde(rename = "L")]
    pub lipschitz: Option<f64>,
}

/// Serialized anchor count for closed-form utilities.
const UTILITY_SAMPLES: usize = 512;

pub fn save_utility(utility: &Utility<f64>, path: &Path) -> Result<()> {
    let file = UtilityFile {
        horizon: utility.horizon(),
        anchors: utility.to_anchors(UTILITY_SAMPLES),
        lipschitz: utility.lipschitz(),
    };
    std::fs::write(path, serde_json::to_string_pretty(&file)?)?;
    Ok(())
}

pub fn load_utility(path: &Path) -> Result<Utility<f64>> {
    let text = std::fs::read_to_string(path)?;
    let file: UtilityFile =
        serde_json::from_str(&text).map_err(|e| schema_err(path, e.to_string()))?;
    Utility::piecewise(file.anchors, file.horizon, file.lipschitz)
        .map_err(|e| schema_err(path, e.to_string()))
}

/// Policy file: actions indexed stage-major, then state, then grid index.
#[derive(Debug, Serialize, Deserialize)]
pub struct PolicyFile {
    #[serde(rename = "H")]
    pub horizon: usize,
    pub d: usize,
    pub actions: Vec<Vec<Vec<u16>>>,
}

pub fn save_policy(policy: &EnlargedPolicy, path: &Path) -> Result<()> {
    let (h, s, d) = (policy.horizon(), policy.num_states(), policy.d());
    let actions = (1..=h)
        .map(|hh| {
            (0..s)
                .map(|ss| {
                    (0..d)
                        .map(|j| policy.action(hh, ss, j).unwrap() as u16)
                        .collect()
                })
                .collect()
        })
        .collect();
    let file = PolicyFile {
        horizon: h,
        d,
        actions,
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

pub fn load_policy(path: &Path) -> Result<EnlargedPolicy> {
    let text = std::fs::read_to_string(path)?;
    let file: PolicyFile =
        serde_json::from_str(&text).map_err(|e| schema_err(path, e.to_string()))?;
    let num_states = file.actions.first().map_or(0, Vec::len);
    let mut flat = Vec::with_capacity(file.horizon * num_states * file.d);
    if file.actions.len() != file.horizon {
        return Err(schema_err(path, "stage count mismatch"));
    }
    for stage in &file.actions {
        if stage.len() != num_states {
            return Err(schema_err(path, "state count mismatch"));
        }
        for row in stage {
            if row.len() != file.d {
                return Err(schema_err(path, "grid index count mismatch"));
            }
            flat.extend_from_slice(row);
        }
    }
    EnlargedPolicy::new(file.horizon, num_states, file.d, flat)
        .map_err(|e| schema_err(path, e.to_string()))
}

/// Empirical-model file: the estimated transitions in the environment
/// format plus the raw visit counts, indexed like the transition table.
#[derive(Debug, Serialize, Deserialize)]
pub struct EmpiricalModelFile {
    #[serde(flatten)]
    pub model: MdpFile,
    pub n_per_triple: usize,
    pub counts: Vec<Vec<Vec<Vec<u64>>>>,
}

pub fn save_empirical_model(
    model: &crate::estimation::EmpiricalModel<f64>,
    rewards_from: &Mdp<f64>,
    path: &Path,
) -> Result<()> {
    let mdp = model.to_mdp(rewards_from)?;
    let (s, a, h) = (mdp.num_states(), mdp.num_actions(), mdp.horizon());
    let counts = (1..=h)
        .map(|hh| {
            (0..s)
                .map(|ss| {
                    (0..a)
                        .map(|aa| model.counts(hh, ss, aa).to_vec())
                        .collect()
                })
                .collect()
        })
        .collect();
    let file = EmpiricalModelFile {
        model: MdpFile::from_mdp(&mdp),
        n_per_triple: model.n_per_triple(),
        counts,
    };
    std::fs::write(path, serde_json::to_string(&file)?)?;
    Ok(())
}

/// Survey answer CSV with header `s,h,y_eur,action`.
pub fn load_survey_answers(path: &Path) -> Result<Vec<crate::zoo::SurveyRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for record in reader.deserialize() {
        let row: crate::zoo::SurveyRow = record?;
        rows.push(row);
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{zoo, ZooId};

    #[test]
    fn mdp_roundtrip() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("mdp.json");
        let mdp = zoo::<f64>(ZooId::Survey).unwrap().mdp;
        save_mdp(&mdp, &path).unwrap();
        let loaded = load_mdp(&path).unwrap();
        assert_eq!(mdp, loaded);
    }

    #[test]
    fn trajectory_roundtrip() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trajs.json");
        let demos = DemoDataset::new(
            0,
            vec![Trajectory {
                steps: vec![(0, 1), (2, 0)],
                terminal_state: 3,
            }],
        );
        save_trajectories(&demos, &path).unwrap();
        let loaded = load_trajectories(&path, 0).unwrap();
        assert_eq!(loaded.trajectories, demos.trajectories);
    }

    #[test]
    fn utility_roundtrip_preserves_anchor_values() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("utility.json");
        let u = Utility::piecewise(vec![(1.0, 0.1), (1.5, 0.7)], 2.0, Some(4.0)).unwrap();
        save_utility(&u, &path).unwrap();
        let loaded = load_utility(&path).unwrap();
        for g in [0.0, 0.3, 1.0, 1.2, 1.5, 2.0] {
            assert!((u.eval(g) - loaded.eval(g)).abs() < 1e-12);
        }
    }

    #[test]
    fn policy_roundtrip() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("policy.json");
        let entry = zoo::<f64>(ZooId::Branching).unwrap();
        let grid = entry.grid();
        let du = crate::utility::DiscretizedUtility::sample(
            &crate::utility::Utility::linear(2.0),
            &grid,
        )
        .unwrap();
        let policy = crate::planner::plan(&du, &entry.mdp, &grid).unwrap().policy;
        save_policy(&policy, &path).unwrap();
        let loaded = load_policy(&path).unwrap();
        assert_eq!(policy, loaded);
    }

    #[test]
    fn return_distribution_roundtrip() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("dist.json");
        let grid = Grid::new(0.5, 2).unwrap();
        let dist = ReturnDistribution::new(grid, vec![0.25, 0.0, 0.5, 0.0, 0.25]).unwrap();
        save_return_distribution(&dist, &path).unwrap();
        let loaded = load_return_distribution(&path).unwrap();
        assert_eq!(dist.weights(), loaded.weights());
        assert!(dist.grid().compatible(loaded.grid()));
    }

    #[test]
    fn empirical_model_file_carries_counts() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("model.json");
        let mdp = zoo::<f64>(ZooId::Branching).unwrap().mdp;
        let model = crate::estimation::explore(&mdp, 160, 1).unwrap();
        save_empirical_model(&model, &mdp, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let file: EmpiricalModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(file.n_per_triple, 10);
        let total: u64 = file
            .counts
            .iter()
            .flatten()
            .flatten()
            .flatten()
            .sum();
        assert_eq!(total, model.total_samples());
        // the embedded transition estimate parses as a valid environment
        file.model.into_mdp(&path).unwrap();
    }

    #[test]
    fn survey_answers_parse_from_csv() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("answers.csv");
        std::fs::write(&path, "s,h,y_eur,action\nM,2,30,a-\nH,3,200,a0\n").unwrap();
        let rows = load_survey_answers(&path).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].s, "M");
        assert_eq!(rows[0].h, 2);
        assert_eq!(rows[0].y_eur, 30.0);
        assert_eq!(rows[0].action, "a-");
        let policy = crate::zoo::ingest_survey_policy::<f64>(&rows).unwrap();
        assert_eq!(policy.action_at(2, 1, 0.03).unwrap(), 2);
        assert_eq!(policy.action_at(3, 2, 0.2).unwrap(), 0);
    }

    #[test]
    fn malformed_mdp_reports_schema_error() {
        let dir = std::env::temp_dir().join("riskutil_io_test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("bad.json");
        std::fs::write(&path, "{\"S\": 1}").unwrap();
        assert!(matches!(load_mdp(&path), Err(Error::Schema { .. })));
    }
}
