use std::collections::BTreeMap;
use std::path::Path;

use super::HarnessError;
use crate::arena::{load_arena, ArenaSpec};

pub const TUTORIAL_ID: &str = "tutorial";

const TUTORIAL: &str = include_str!("../../resources/tutorial.arena");

macro_rules! bundled {
    ($($id:literal),* $(,)?) => {
        &[$(($id, include_str!(concat!("../../resources/tasks/", $id, ".arena")))),*]
    };
}

const BUNDLED: &[(&str, &str)] = bundled![
    "l01_task1", "l01_task2", "l01_task3", "l01_task4",
    "l02_task1", "l02_task2", "l02_task3", "l02_task4",
    "l03_task1", "l03_task2", "l03_task3", "l03_task4",
    "l04_task1", "l04_task2", "l04_task3", "l04_task4",
    "l05_task1", "l05_task2", "l05_task3", "l05_task4",
    "l06_task1", "l06_task2", "l06_task3", "l06_task4",
    "l07_task1", "l07_task2", "l07_task3", "l07_task4",
    "l08_task1", "l08_task2", "l08_task3", "l08_task4",
    "l09_task1", "l09_task2", "l09_task3", "l09_task4",
    "l10_task1", "l10_task2", "l10_task3", "l10_task4",
];

/// A set of tasks keyed by id, iterated in id order.
#[derive(Clone, Debug, Default)]
pub struct TaskPack {
    tasks: BTreeMap<String, ArenaSpec>,
}

impl TaskPack {
    /// The 40 tasks shipped with the crate, four per level.
    pub fn bundled() -> Result<Self, HarnessError> {
        let mut pack = TaskPack::default();
        for (id, text) in BUNDLED {
            let spec = load_arena(text).map_err(|e| HarnessError::Task {
                task: id.to_string(),
                message: e.to_string(),
            })?;
            pack.insert(spec);
        }
        Ok(pack)
    }

    pub fn tutorial() -> Result<ArenaSpec, HarnessError> {
        load_arena(TUTORIAL).map_err(|e| HarnessError::Task {
            task: TUTORIAL_ID.into(),
            message: e.to_string(),
        })
    }

    /// Reads every `*.arena` file in a directory.
    pub fn load_dir(dir: &Path) -> Result<Self, HarnessError> {
        let mut pack = TaskPack::default();
        let mut paths: Vec<_> = std::fs::read_dir(dir)
            .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "arena"))
            .collect();
        paths.sort();
        for p in paths {
            let text = std::fs::read_to_string(&p)
                .map_err(|e| HarnessError::Io(format!("{}: {e}", p.display())))?;
            let spec = load_arena(&text).map_err(|e| HarnessError::Task {
                task: p.display().to_string(),
                message: e.to_string(),
            })?;
            pack.insert(spec);
        }
        Ok(pack)
    }

    pub fn insert(&mut self, spec: ArenaSpec) {
        self.tasks.insert(spec.id.clone(), spec);
    }

    pub fn get(&self, id: &str) -> Option<&ArenaSpec> {
        self.tasks.get(id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.tasks.keys().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    /// Ids of the tasks at the given levels, in id order.
    pub fn levels(&self, levels: &[u8]) -> Vec<String> {
        self.tasks
            .values()
            .filter(|s| s.level().is_some_and(|l| levels.contains(&l)))
            .map(|s| s.id.clone())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arena::ObjectKind;

    #[test]
    fn bundled_pack_has_four_tasks_per_level() {
        let pack = TaskPack::bundled().unwrap();
        assert_eq!(pack.len(), 40);
        for level in 1..=10 {
            assert_eq!(pack.levels(&[level]).len(), 4, "level {level}");
        }
    }

    #[test]
    fn support_task_has_block_and_platform() {
        let pack = TaskPack::bundled().unwrap();
        let spec = pack.get("l05_task2").unwrap();
        let has = |k| spec.objects.iter().any(|o| o.kind == k);
        assert!(has(ObjectKind::PushableBlock));
        assert!(has(ObjectKind::Platform));
    }

    #[test]
    fn tutorial_loads() {
        let t = TaskPack::tutorial().unwrap();
        assert_eq!(t.id, TUTORIAL_ID);
    }
}
