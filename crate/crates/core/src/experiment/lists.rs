use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ExperimentError, Task};
use crate::stats::AnimacyCondition;
use crate::triads::{Surface, Triad};

pub const CATCH_PER_LIST: usize = 20;

/// One triad as shown to participants: base forms only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Item {
    pub item_id: String,
    pub subject: String,
    pub verb: String,
    pub object: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub condition: Option<AnimacyCondition>,
}

/// Items keyed by triad key. Triads whose two arguments have the same
/// surface form cannot be scored and are dropped, as are repeated keys.
pub fn items_from_triads(triads: &[Triad], surface: Surface) -> Vec<Item> {
    let mut seen = BTreeSet::new();
    triads
        .iter()
        .filter(|t| {
            let [s, _, o] = t.surface(surface);
            s != o
        })
        .filter(|t| seen.insert(t.key()))
        .map(|t| {
            let [s, v, o] = t.surface(surface);
            Item {
                item_id: t.key(),
                subject: s.to_string(),
                verb: v.to_string(),
                object: o.to_string(),
                condition: None,
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentList {
    pub list_id: usize,
    pub task: Task,
    pub critical_items: Vec<String>,
    pub catch_items: Vec<String>,
}

impl ExperimentList {
    pub fn len(&self) -> usize {
        self.critical_items.len() + self.catch_items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListOptions {
    pub n_lists: usize,
    pub catch_per_list: usize,
    /// Every list gets the same catch items; otherwise each list draws its
    /// own, disjoint from the others.
    pub reuse_catch: bool,
    pub seed: u64,
    pub task: Task,
}

impl Default for ListOptions {
    fn default() -> Self {
        ListOptions {
            n_lists: 5,
            catch_per_list: CATCH_PER_LIST,
            reuse_catch: true,
            seed: 0,
            task: Task::ChooseSubject,
        }
    }
}

/// Lists plus the catalogue of every item they mention.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListsFile {
    pub task: Task,
    pub seed: u64,
    pub items: Vec<Item>,
    pub lists: Vec<ExperimentList>,
}

impl ListsFile {
    pub fn catalogue(&self) -> BTreeMap<&str, &Item> {
        self.items.iter().map(|i| (i.item_id.as_str(), i)).collect()
    }

    pub fn item(&self, id: &str) -> Option<&Item> {
        self.items.iter().find(|i| i.item_id == id)
    }

    /// Attaches animacy annotations to the catalogue; unknown keys are
    /// ignored, unannotated items keep `None`.
    pub fn annotate(&mut self, annotations: &BTreeMap<String, AnimacyCondition>) {
        for item in &mut self.items {
            if let Some(c) = annotations.get(&item.item_id) {
                item.condition = Some(*c);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        let ids: BTreeSet<&str> = self.items.iter().map(|i| i.item_id.as_str()).collect();
        for (i, list) in self.lists.iter().enumerate() {
            if list.list_id != i {
                return Err(ExperimentError::UnknownList(list.list_id));
            }
            let critical: BTreeSet<&str> = list.critical_items.iter().map(String::as_str).collect();
            for id in list.critical_items.iter().chain(&list.catch_items) {
                if !ids.contains(id.as_str()) {
                    return Err(ExperimentError::UnknownItem(id.clone()));
                }
            }
            if let Some(c) = list.catch_items.iter().find(|c| critical.contains(c.as_str())) {
                return Err(ExperimentError::OverlappingItem(c.clone()));
            }
        }
        Ok(())
    }
}

/// Shuffles the critical items and deals them into `n_lists` contiguous
/// blocks whose sizes differ by at most one (earlier lists get the extra
/// item). Each list then receives `catch_per_list` catch items.
pub fn build_lists(
    critical: &[Item],
    catch_pool: &[Item],
    opts: &ListOptions,
) -> Result<ListsFile, ExperimentError> {
    if critical.is_empty() || opts.n_lists == 0 {
        return Err(ExperimentError::NoItems);
    }
    let needed = if opts.reuse_catch {
        opts.catch_per_list
    } else {
        opts.catch_per_list * opts.n_lists
    };
    if catch_pool.len() < needed {
        return Err(ExperimentError::InsufficientCatchPool {
            needed,
            available: catch_pool.len(),
        });
    }
    let critical_ids: BTreeSet<&str> = critical.iter().map(|i| i.item_id.as_str()).collect();
    if let Some(c) = catch_pool.iter().find(|c| critical_ids.contains(c.item_id.as_str())) {
        return Err(ExperimentError::OverlappingItem(c.item_id.clone()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut order: Vec<&Item> = critical.iter().collect();
    order.shuffle(&mut rng);
    let mut catch: Vec<&Item> = catch_pool.iter().collect();
    catch.shuffle(&mut rng);

    let base = order.len() / opts.n_lists;
    let extra = order.len() % opts.n_lists;
    let mut lists = Vec::with_capacity(opts.n_lists);
    let mut start = 0;
    for list_id in 0..opts.n_lists {
        let size = base + usize::from(list_id < extra);
        let catch_start = if opts.reuse_catch { 0 } else { list_id * opts.catch_per_list };
        lists.push(ExperimentList {
            list_id,
            task: opts.task,
            critical_items: order[start..start + size].iter().map(|i| i.item_id.clone()).collect(),
            catch_items: catch[catch_start..catch_start + opts.catch_per_list]
                .iter()
                .map(|i| i.item_id.clone())
                .collect(),
        });
        start += size;
    }

    let used: BTreeSet<&str> = lists
        .iter()
        .flat_map(|l| l.critical_items.iter().chain(&l.catch_items))
        .map(String::as_str)
        .collect();
    let items = critical
        .iter()
        .chain(catch_pool)
        .filter(|i| used.contains(i.item_id.as_str()))
        .cloned()
        .collect();
    Ok(ListsFile {
        task: opts.task,
        seed: opts.seed,
        items,
        lists,
    })
}

#[cfg(test)]
pub(crate) fn toy_items(prefix: &str, n: usize) -> Vec<Item> {
    (0..n)
        .map(|i| Item {
            item_id: format!("{prefix}{i}"),
            subject: format!("{prefix}subj{i}"),
            verb: format!("{prefix}verb{i}"),
            object: format!("{prefix}obj{i}"),
            condition: None,
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hundred_per_list() {
        let lf = build_lists(&toy_items("c", 500), &toy_items("k", 20), &ListOptions::default()).unwrap();
        assert_eq!(lf.lists.len(), 5);
        for l in &lf.lists {
            assert_eq!(l.critical_items.len(), 100);
            assert_eq!(l.catch_items.len(), 20);
        }
        lf.validate().unwrap();
    }

    #[test]
    fn uneven_split() {
        let lf = build_lists(&toy_items("c", 589), &toy_items("k", 20), &ListOptions::default()).unwrap();
        let sizes: Vec<usize> = lf.lists.iter().map(|l| l.critical_items.len()).collect();
        assert_eq!(sizes, vec![118, 118, 118, 118, 117]);
        let all: BTreeSet<&String> = lf.lists.iter().flat_map(|l| &l.critical_items).collect();
        assert_eq!(all.len(), 589);
    }

    #[test]
    fn deterministic() {
        let opts = ListOptions {
            seed: 17,
            ..Default::default()
        };
        let a = build_lists(&toy_items("c", 50), &toy_items("k", 30), &opts).unwrap();
        let b = build_lists(&toy_items("c", 50), &toy_items("k", 30), &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn catch_pool_checks() {
        let opts = ListOptions {
            reuse_catch: false,
            ..Default::default()
        };
        match build_lists(&toy_items("c", 50), &toy_items("k", 20), &opts) {
            Err(ExperimentError::InsufficientCatchPool { needed: 100, available: 20 }) => {}
            other => panic!("{other:?}"),
        }
        let lf = build_lists(&toy_items("c", 50), &toy_items("k", 100), &opts).unwrap();
        let catch: BTreeSet<&String> = lf.lists.iter().flat_map(|l| &l.catch_items).collect();
        assert_eq!(catch.len(), 100);
        assert!(matches!(
            build_lists(&toy_items("c", 50), &toy_items("k", 19), &ListOptions::default()),
            Err(ExperimentError::InsufficientCatchPool { .. })
        ));
    }

    #[test]
    fn overlap_is_rejected() {
        let items = toy_items("c", 30);
        assert!(matches!(
            build_lists(&items, &items[..20], &ListOptions::default()),
            Err(ExperimentError::OverlappingItem(_))
        ));
    }
}
