//! Directory serialization for tabular MDPs: transition and reward tensors
//! in the text tensor format plus a key-value metadata file.

use std::fs;
use std::path::Path;

use tensor_core::io::{read_tensor, write_tensor};

use crate::mdp::TabularMDP;
use crate::{MarlError, Result};

const TRANSITION_FILE: &str = "transition.txt";
const REWARD_FILE: &str = "reward.txt";
const META_FILE: &str = "meta.txt";

/// Writes `transition.txt`, `reward.txt`, and `meta.txt` into `dir`
/// (created if missing). `seed` records the generator seed for provenance.
pub fn save_mdp(dir: &Path, mdp: &TabularMDP, seed: u64) -> Result<()> {
    fs::create_dir_all(dir)?;
    write_tensor(&dir.join(TRANSITION_FILE), mdp.transition())
        .map_err(|e| MarlError::Parse(e.to_string()))?;
    write_tensor(&dir.join(REWARD_FILE), mdp.reward())
        .map_err(|e| MarlError::Parse(e.to_string()))?;
    let actions: Vec<String> = mdp.action_dims().iter().map(|d| d.to_string()).collect();
    let meta = format!(
        "states = {}\nactions = {}\ndiscount = {}\nseed = {}\n",
        mdp.n_states(),
        actions.join(" "),
        mdp.discount(),
        seed
    );
    fs::write(dir.join(META_FILE), meta)?;
    Ok(())
}

/// Loads an MDP saved by [`save_mdp`]; returns the MDP and the recorded seed.
pub fn load_mdp(dir: &Path) -> Result<(TabularMDP, u64)> {
    let transition = read_tensor(&dir.join(TRANSITION_FILE))
        .map_err(|e| MarlError::Parse(e.to_string()))?;
    let reward =
        read_tensor(&dir.join(REWARD_FILE)).map_err(|e| MarlError::Parse(e.to_string()))?;
    let meta = fs::read_to_string(dir.join(META_FILE))?;

    let mut discount = None;
    let mut seed = 0u64;
    for line in meta.lines() {
        let Some((key, value)) = line.split_once('=') else {
            continue;
        };
        match key.trim() {
            "discount" => {
                discount = Some(value.trim().parse::<f64>().map_err(|_| {
                    MarlError::Parse(format!("bad discount `{}`", value.trim()))
                })?)
            }
            "seed" => {
                seed = value
                    .trim()
                    .parse::<u64>()
                    .map_err(|_| MarlError::Parse(format!("bad seed `{}`", value.trim())))?
            }
            _ => {}
        }
    }
    let discount =
        discount.ok_or_else(|| MarlError::Parse("meta.txt missing discount".into()))?;
    Ok((TabularMDP::new(transition, reward, discount)?, seed))
}
