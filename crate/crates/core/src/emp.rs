//! Excitation and measurement patterns (EMPs) and their enumeration.
//!
//! An EMP is a pair `(B, C)` of excited and measured node sets. The
//! enumerators generate the minimal patterns for branches, cycles, and
//! networks described by per-node role constraints. Patterns of the
//! well-known small cases carry their conventional labels (`I`…`XII`,
//! `1`…`24`) and are returned in label order; everything else is numbered
//! in generation order.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::netmodel::{EdgeId, NetworkModel, Topology};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Emp {
    excited: BTreeSet<usize>,
    measured: BTreeSet<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
}

impl Emp {
    pub fn new(excited: impl IntoIterator<Item = usize>, measured: impl IntoIterator<Item = usize>) -> Self {
        Self { excited: excited.into_iter().collect(), measured: measured.into_iter().collect(), label: None }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    pub fn excited(&self) -> &BTreeSet<usize> {
        &self.excited
    }

    pub fn measured(&self) -> &BTreeSet<usize> {
        &self.measured
    }

    pub fn label(&self) -> Option<&str> {
        self.label.as_deref()
    }

    /// Cardinality `|B| + |C|`.
    pub fn nu(&self) -> usize {
        self.excited.len() + self.measured.len()
    }

    /// Nodes that are both excited and measured.
    pub fn doubled(&self) -> BTreeSet<usize> {
        self.excited.intersection(&self.measured).copied().collect()
    }

    /// Set equality, ignoring labels.
    pub fn same_pattern(&self, other: &Emp) -> bool {
        self.excited == other.excited && self.measured == other.measured
    }

    fn key(&self) -> (Vec<usize>, Vec<usize>) {
        (self.excited.iter().copied().collect(), self.measured.iter().copied().collect())
    }
}

/// Sorted indices joined by `sep`.
pub fn join_set(set: &BTreeSet<usize>, sep: &str) -> String {
    set.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(sep)
}

impl fmt::Display for Emp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({{{}}}, {{{}}})", join_set(&self.excited, ", "), join_set(&self.measured, ", "))
    }
}

/// Requirement placed on a single node.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    MustExcite,
    MustMeasure,
    /// Excited or measured, not both.
    Either,
    Both,
    /// Member of a group in which exactly one node is doubled and every
    /// other member takes a single role.
    OneOfGroupBoth(usize),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoleConstraints {
    roles: Vec<Role>,
}

impl RoleConstraints {
    /// `roles[k]` applies to node `k + 1`.
    pub fn new(roles: Vec<Role>) -> Result<Self> {
        if roles.is_empty() {
            return Err(Error::InvalidSize("constraints must cover at least one node".into()));
        }
        Ok(Self { roles })
    }

    pub fn n(&self) -> usize {
        self.roles.len()
    }

    pub fn role(&self, node: usize) -> Role {
        self.roles[node - 1]
    }

    /// Source excited, sink measured, inner nodes free.
    pub fn branch(n: usize) -> Result<Self> {
        check_size(n)?;
        let roles = (1..=n)
            .map(|i| match i {
                1 => Role::MustExcite,
                i if i == n => Role::MustMeasure,
                _ => Role::Either,
            })
            .collect();
        Self::new(roles)
    }

    /// The six-node example combining a branch `1 -> 2 -> 3` with the loop
    /// `3 -> 4 -> 5 -> 3` and the tail `5 -> 6`.
    pub fn hybrid_example() -> Self {
        use Role::*;
        Self { roles: vec![MustExcite, Either, OneOfGroupBoth(0), OneOfGroupBoth(0), OneOfGroupBoth(0), MustMeasure] }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 {
        Err(Error::InvalidSize("n must be ≥ 2".into()))
    } else {
        Ok(())
    }
}

/// Cartesian expansion of role constraints.
///
/// Order: doubled-node choice of each group (groups by id, node ascending)
/// varies slowest; then the excite(0)/measure(1) choice vector over the free
/// nodes, read as a binary number with the lowest node as the most
/// significant bit. Duplicates are dropped. Patterns are numbered `1..`.
pub fn enumerate_constrained(constraints: &RoleConstraints) -> Vec<Emp> {
    let n = constraints.n();
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for node in 1..=n {
        if let Role::OneOfGroupBoth(g) = constraints.role(node) {
            groups.entry(g).or_default().push(node);
        }
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();

    // every combination of one doubled node per group, first group slowest
    let mut doubled_choices: Vec<Vec<usize>> = vec![Vec::new()];
    for members in &groups {
        doubled_choices = doubled_choices
            .into_iter()
            .flat_map(|prefix| {
                members.iter().map(move |&d| {
                    let mut v = prefix.clone();
                    v.push(d);
                    v
                })
            })
            .collect();
    }

    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for doubled in &doubled_choices {
        let free: Vec<usize> = (1..=n)
            .filter(|&node| match constraints.role(node) {
                Role::Either => true,
                Role::OneOfGroupBoth(_) => !doubled.contains(&node),
                _ => false,
            })
            .collect();
        let width = free.len();
        for code in 0u64..(1u64 << width) {
            let mut excited = BTreeSet::new();
            let mut measured = BTreeSet::new();
            for node in 1..=n {
                match constraints.role(node) {
                    Role::MustExcite => {
                        excited.insert(node);
                    }
                    Role::MustMeasure => {
                        measured.insert(node);
                    }
                    Role::Both => {
                        excited.insert(node);
                        measured.insert(node);
                    }
                    Role::OneOfGroupBoth(_) if doubled.contains(&node) => {
                        excited.insert(node);
                        measured.insert(node);
                    }
                    Role::Either | Role::OneOfGroupBoth(_) => {
                        let pos = free.iter().position(|&f| f == node).unwrap();
                        if (code >> (width - 1 - pos)) & 1 == 1 {
                            measured.insert(node);
                        } else {
                            excited.insert(node);
                        }
                    }
                }
            }
            let emp = Emp { excited, measured, label: None };
            if seen.insert(emp.key()) {
                out.push(emp);
            }
        }
    }
    number(out)
}

fn number(emps: Vec<Emp>) -> Vec<Emp> {
    emps.into_iter().enumerate().map(|(k, e)| e.with_label((k + 1).to_string())).collect()
}

/// The `2^(n-2)` minimal patterns of an `n`-node branch.
///
/// Node 2 toggles slowest, matching the usual tabulation; the 3- and 4-node
/// cases carry roman labels in label order.
pub fn enumerate_branch_emps(n: usize) -> Result<Vec<Emp>> {
    check_size(n)?;
    let emps = enumerate_constrained(&RoleConstraints::branch(n)?);
    Ok(match n {
        3 => apply_labels(emps, BRANCH3),
        4 => apply_labels(emps, BRANCH4),
        _ => emps,
    })
}

/// Options for cycle enumeration.
#[derive(Clone, Copy, Debug, Default)]
pub struct CycleOptions {
    /// For even `n > 3`, also emit the `n·2^(n-1)` single-doubled-node
    /// patterns after the two alternating ones.
    pub even_doubled_family: bool,
}

/// Minimal patterns of an `n`-node cycle: the two alternating patterns for
/// even `n > 3`, otherwise the `n·2^(n-1)` patterns with exactly one doubled
/// node.
pub fn enumerate_cycle_emps(n: usize) -> Result<Vec<Emp>> {
    enumerate_cycle_emps_with(n, CycleOptions::default())
}

pub fn enumerate_cycle_emps_with(n: usize, options: CycleOptions) -> Result<Vec<Emp>> {
    check_size(n)?;
    let doubled_family = || {
        let roles = vec![Role::OneOfGroupBoth(0); n];
        enumerate_constrained(&RoleConstraints { roles })
    };
    if n.is_multiple_of(2) && n > 3 {
        let odd: BTreeSet<usize> = (1..=n).step_by(2).collect();
        let even: BTreeSet<usize> = (2..=n).step_by(2).collect();
        let mut out = vec![
            Emp { excited: odd.clone(), measured: even.clone(), label: Some("I".into()) },
            Emp { excited: even, measured: odd, label: Some("II".into()) },
        ];
        if options.even_doubled_family {
            out.extend(doubled_family().into_iter().enumerate().map(|(k, e)| {
                let label = (k + 3).to_string();
                e.with_label(label)
            }));
        }
        return Ok(out);
    }
    let emps = doubled_family();
    Ok(match n {
        2 => apply_labels(emps, CYCLE2),
        3 => apply_labels(emps, CYCLE3),
        _ => emps,
    })
}

/// The 24 patterns of the six-node hybrid example, labelled `1`…`24` in
/// their conventional order.
pub fn hybrid_emps() -> Vec<Emp> {
    apply_labels(enumerate_constrained(&RoleConstraints::hybrid_example()), HYBRID)
}

/// Minimal patterns for a model's topology: branches and cycles by size,
/// plus the six-node hybrid example.
pub fn enumerate_for(model: &NetworkModel) -> Result<Vec<Emp>> {
    match model.topology() {
        Topology::Branch => enumerate_branch_emps(model.n()),
        Topology::Cycle => enumerate_cycle_emps(model.n()),
        Topology::General if is_hybrid_example(model) => Ok(hybrid_emps()),
        Topology::General => Err(Error::Validation(
            "no minimal-pattern enumerator for this topology (branches, cycles and the six-node hybrid are supported)"
                .into(),
        )),
    }
}

fn is_hybrid_example(model: &NetworkModel) -> bool {
    let want = [(1, 2), (2, 3), (5, 3), (3, 4), (4, 5), (5, 6)].map(|(f, t)| EdgeId::new(f, t));
    let mut want: Vec<EdgeId> = want.to_vec();
    want.sort();
    let have: Vec<EdgeId> = model.edges().iter().map(|e| e.id()).collect();
    model.n() == 6 && have == want
}

/// Every module `i -> j` with `i` excited and `j` measured.
pub fn direct_modules(emp: &Emp, model: &NetworkModel) -> BTreeSet<EdgeId> {
    model
        .edges()
        .iter()
        .filter(|e| emp.excited.contains(&e.from) && emp.measured.contains(&e.to))
        .map(|e| e.id())
        .collect()
}

/// Necessary condition for identifiability: every node is excited or measured.
pub fn validate_necessary(emp: &Emp, n: usize) -> bool {
    (1..=n).all(|i| emp.excited.contains(&i) || emp.measured.contains(&i))
        && emp.excited.iter().chain(&emp.measured).all(|&i| (1..=n).contains(&i))
}

/// CSV with columns `label,excited,measured,nu`; sets are `;`-joined.
pub fn emps_to_csv(emps: &[Emp]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "excited", "measured", "nu"]).unwrap();
    for e in emps {
        w.write_record([
            e.label().unwrap_or(""),
            &join_set(&e.excited, ";"),
            &join_set(&e.measured, ";"),
            &e.nu().to_string(),
        ])
        .unwrap();
    }
    String::from_utf8(w.into_inner().unwrap()).unwrap()
}

type LabelTable = &'static [(&'static str, &'static [usize], &'static [usize])];

/// Attaches labels from `table` and reorders to table order. Every pattern
/// must appear in the table.
fn apply_labels(emps: Vec<Emp>, table: LabelTable) -> Vec<Emp> {
    assert_eq!(emps.len(), table.len(), "label table size mismatch");
    table
        .iter()
        .map(|(label, b, c)| {
            let wanted = Emp::new(b.iter().copied(), c.iter().copied());
            let found = emps
                .iter()
                .find(|e| e.same_pattern(&wanted))
                .unwrap_or_else(|| panic!("pattern {wanted} missing from enumeration"));
            Emp { label: Some((*label).to_string()), ..found.clone() }
        })
        .collect()
}

const CYCLE2: LabelTable =
    &[("I", &[1, 2], &[1]), ("II", &[1, 2], &[2]), ("III", &[1], &[1, 2]), ("IV", &[2], &[1, 2])];

const CYCLE3: LabelTable = &[
    ("I", &[1, 2, 3], &[1]),
    ("II", &[1, 2, 3], &[2]),
    ("III", &[1, 2, 3], &[3]),
    ("IV", &[1], &[1, 2, 3]),
    ("V", &[2], &[1, 2, 3]),
    ("VI", &[3], &[1, 2, 3]),
    ("VII", &[1, 2], &[1, 3]),
    ("VIII", &[1, 3], &[1, 2]),
    ("IX", &[2, 3], &[1, 2]),
    ("X", &[1, 2], &[2, 3]),
    ("XI", &[1, 3], &[2, 3]),
    ("XII", &[2, 3], &[1, 3]),
];

const BRANCH3: LabelTable = &[("I", &[1, 2], &[3]), ("II", &[1], &[2, 3])];

const BRANCH4: LabelTable =
    &[("I", &[1, 3], &[2, 4]), ("II", &[1, 2], &[3, 4]), ("III", &[1, 2, 3], &[4]), ("IV", &[1], &[2, 3, 4])];

const HYBRID: LabelTable = &[
    ("1", &[1, 2, 3, 4, 5], &[3, 6]),
    ("2", &[1, 2, 3, 4, 5], &[4, 6]),
    ("3", &[1, 2, 3, 4, 5], &[5, 6]),
    ("4", &[1, 2, 3], &[3, 4, 5, 6]),
    ("5", &[1, 2, 4], &[3, 4, 5, 6]),
    ("6", &[1, 2, 5], &[3, 4, 5, 6]),
    ("7", &[1, 2, 3, 4], &[3, 5, 6]),
    ("8", &[1, 2, 3, 5], &[3, 4, 6]),
    ("9", &[1, 2, 4, 5], &[3, 4, 6]),
    ("10", &[1, 2, 3, 4], &[4, 5, 6]),
    ("11", &[1, 2, 3, 5], &[4, 5, 6]),
    ("12", &[1, 2, 4, 5], &[3, 5, 6]),
    ("13", &[1, 3, 4, 5], &[2, 3, 6]),
    ("14", &[1, 3, 4, 5], &[2, 4, 6]),
    ("15", &[1, 3, 4, 5], &[2, 5, 6]),
    ("16", &[1, 3], &[2, 3, 4, 5, 6]),
    ("17", &[1, 4], &[2, 3, 4, 5, 6]),
    ("18", &[1, 5], &[2, 3, 4, 5, 6]),
    ("19", &[1, 3, 4], &[2, 3, 5, 6]),
    ("20", &[1, 3, 5], &[2, 3, 4, 6]),
    ("21", &[1, 4, 5], &[2, 3, 4, 6]),
    ("22", &[1, 3, 4], &[2, 4, 5, 6]),
    ("23", &[1, 3, 5], &[2, 4, 5, 6]),
    ("24", &[1, 4, 5], &[2, 3, 5, 6]),
];

#[cfg(test)]
mod tests {
    use super::*;

    fn sets(emps: &[Emp]) -> Vec<(Vec<usize>, Vec<usize>)> {
        emps.iter().map(Emp::key).collect()
    }

    #[test]
    fn branch_four_in_label_order() {
        let emps = enumerate_branch_emps(4).unwrap();
        assert_eq!(
            sets(&emps),
            vec![
                (vec![1, 3], vec![2, 4]),
                (vec![1, 2], vec![3, 4]),
                (vec![1, 2, 3], vec![4]),
                (vec![1], vec![2, 3, 4]),
            ]
        );
        assert_eq!(emps[3].label(), Some("IV"));
    }

    #[test]
    fn branch_five_matches_tabulated_order() {
        let emps = enumerate_branch_emps(5).unwrap();
        assert_eq!(emps.len(), 8);
        assert_eq!(emps[1].key(), (vec![1, 2, 3], vec![4, 5]));
        assert_eq!(emps[2].key(), (vec![1, 2, 4], vec![3, 5]));
        assert_eq!(emps[3].key(), (vec![1, 2], vec![3, 4, 5]));
        assert_eq!(emps[7].key(), (vec![1], vec![2, 3, 4, 5]));
        assert_eq!(emps[3].label(), Some("4"));
    }

    #[test]
    fn branch_eight_entry_forty() {
        let emps = enumerate_branch_emps(8).unwrap();
        assert_eq!(emps.len(), 64);
        assert_eq!(emps[39].key(), (vec![1, 3, 4], vec![2, 5, 6, 7, 8]));
        assert_eq!(emps[32].key(), (vec![1, 3, 4, 5, 6, 7], vec![2, 8]));
    }

    #[test]
    fn branch_two_and_one() {
        let emps = enumerate_branch_emps(2).unwrap();
        assert_eq!(sets(&emps), vec![(vec![1], vec![2])]);
        assert!(matches!(enumerate_branch_emps(1), Err(Error::InvalidSize(_))));
    }

    #[test]
    fn two_node_cycle() {
        let emps = enumerate_cycle_emps(2).unwrap();
        assert_eq!(
            sets(&emps),
            vec![(vec![1, 2], vec![1]), (vec![1, 2], vec![2]), (vec![1], vec![1, 2]), (vec![2], vec![1, 2]),]
        );
    }

    #[test]
    fn three_node_cycle_labels() {
        let emps = enumerate_cycle_emps(3).unwrap();
        assert_eq!(emps.len(), 12);
        let vii = emps.iter().find(|e| e.label() == Some("VII")).unwrap();
        assert_eq!(vii.key(), (vec![1, 2], vec![1, 3]));
    }

    #[test]
    fn even_cycle_alternates() {
        let emps = enumerate_cycle_emps(4).unwrap();
        assert_eq!(sets(&emps), vec![(vec![1, 3], vec![2, 4]), (vec![2, 4], vec![1, 3])]);
        let all = enumerate_cycle_emps_with(4, CycleOptions { even_doubled_family: true }).unwrap();
        assert_eq!(all.len(), 2 + 4 * 8);
        assert!(all[2..].iter().all(|e| e.nu() == 5));
    }

    #[test]
    fn constrained_examples() {
        let hybrid = hybrid_emps();
        assert_eq!(hybrid.len(), 24);
        assert_eq!(hybrid[8].key(), (vec![1, 2, 4, 5], vec![3, 4, 6]));
        assert_eq!(hybrid[8].label(), Some("9"));

        let both = RoleConstraints::new(vec![Role::Both, Role::Both]).unwrap();
        assert_eq!(sets(&enumerate_constrained(&both)), vec![(vec![1, 2], vec![1, 2])]);

        let branch3 = enumerate_constrained(&RoleConstraints::branch(3).unwrap());
        assert_eq!(sets(&branch3), vec![(vec![1, 2], vec![3]), (vec![1], vec![2, 3])]);
    }

    #[test]
    fn enumerate_by_topology() {
        let hybrid = NetworkModel::hybrid_example(&[0.3; 6]).unwrap();
        assert_eq!(enumerate_for(&hybrid).unwrap().len(), 24);
        let cycle = NetworkModel::cycle(3, &[0.5; 3]).unwrap();
        assert_eq!(enumerate_for(&cycle).unwrap().len(), 12);
        let other = NetworkModel::general(3, &[(1, 2, 0.5), (1, 3, 0.5)]).unwrap();
        assert!(matches!(enumerate_for(&other), Err(Error::Validation(_))));
    }

    #[test]
    fn direct_module_examples() {
        let cycle = NetworkModel::cycle(2, &[0.5, 0.5]).unwrap();
        let emp = Emp::new([1, 2], [1]);
        assert_eq!(direct_modules(&emp, &cycle), BTreeSet::from([EdgeId::new(2, 1)]));

        let branch = NetworkModel::branch(3, &[0.5, 0.5]).unwrap();
        let emp = Emp::new([1, 2], [3]);
        assert_eq!(direct_modules(&emp, &branch), BTreeSet::from([EdgeId::new(2, 3)]));
        assert!(direct_modules(&Emp::new([1, 2, 3], []), &branch).is_empty());
    }

    #[test]
    fn necessary_condition() {
        assert!(validate_necessary(&Emp::new([1], [2]), 2));
        assert!(!validate_necessary(&Emp::new([1], [1]), 2));
        assert!(validate_necessary(&Emp::new([1, 3], [2, 4]), 4));
        assert!(!validate_necessary(&Emp::new([1, 3], [2, 5]), 4));
    }

    #[test]
    fn csv_export() {
        let csv = emps_to_csv(&enumerate_branch_emps(3).unwrap());
        assert_eq!(csv, "label,excited,measured,nu\nI,1;2,3,3\nII,1,2;3,3\n");
    }
}
