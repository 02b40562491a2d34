use super::cgx::{CallEdge, CgxDocument, ConstArg, FunctionNode, Site, SpawnEdge};
use std::collections::HashMap;

/// A validated, immutable call graph. Functions are addressed by index
/// internally; adjacency lists are sorted by callee id so traversals are
/// lexicographic.
#[derive(Debug, Clone)]
pub struct CallGraph {
    doc: CgxDocument,
    index: HashMap<String, usize>,
    out: Vec<Vec<usize>>,
    inc: Vec<Vec<usize>>,
    roots: Vec<usize>,
}

impl CallGraph {
    /// Builds indices over an already validated document.
    pub(crate) fn new(doc: CgxDocument) -> Self {
        let index: HashMap<String, usize> = doc
            .functions
            .iter()
            .enumerate()
            .map(|(i, f)| (f.id.clone(), i))
            .collect();
        let n = doc.functions.len();
        let mut out = vec![Vec::new(); n];
        let mut inc = vec![Vec::new(); n];
        for c in &doc.calls {
            let (a, b) = (index[&c.caller], index[&c.callee]);
            out[a].push(b);
            inc[b].push(a);
        }
        let by_id = |v: &mut Vec<usize>| {
            v.sort_by(|&x, &y| doc.functions[x].id.cmp(&doc.functions[y].id));
            v.dedup();
        };
        out.iter_mut().for_each(by_id);
        inc.iter_mut().for_each(by_id);

        let entry = index[&doc.entry];
        let mut spawned: Vec<usize> = doc.spawns.iter().map(|s| index[&s.entry]).collect();
        by_id(&mut spawned);
        let mut roots = vec![entry];
        roots.extend(spawned.into_iter().filter(|&r| r != entry));
        Self {
            doc,
            index,
            out,
            inc,
            roots,
        }
    }

    pub fn document(&self) -> &CgxDocument {
        &self.doc
    }

    pub fn entry(&self) -> &str {
        &self.doc.entry
    }

    pub fn functions(&self) -> &[FunctionNode] {
        &self.doc.functions
    }

    pub fn calls(&self) -> &[CallEdge] {
        &self.doc.calls
    }

    pub fn spawns(&self) -> &[SpawnEdge] {
        &self.doc.spawns
    }

    pub fn consts(&self) -> &[ConstArg] {
        &self.doc.consts
    }

    pub fn function(&self, id: &str) -> Option<&FunctionNode> {
        self.index.get(id).map(|&i| &self.doc.functions[i])
    }

    pub fn has_call(&self, caller: &str, callee: &str) -> bool {
        match (self.index.get(caller), self.index.get(callee)) {
            (Some(&a), Some(b)) => self.out[a].binary_search_by(|x| {
                self.doc.functions[*x].id.as_str().cmp(&self.doc.functions[*b].id)
            })
            .is_ok(),
            _ => false,
        }
    }

    /// Distinct callees of `id`, sorted by id.
    pub fn callees(&self, id: &str) -> Vec<&str> {
        self.index
            .get(id)
            .map(|&i| self.out[i].iter().map(|&j| self.id_of(j)).collect())
            .unwrap_or_default()
    }

    /// Distinct callers of `id`, sorted by id.
    pub fn callers(&self, id: &str) -> Vec<&str> {
        self.index
            .get(id)
            .map(|&i| self.inc[i].iter().map(|&j| self.id_of(j)).collect())
            .unwrap_or_default()
    }

    /// Chain roots: the entry first, then spawn entries sorted by id.
    pub fn roots(&self) -> Vec<&str> {
        self.roots.iter().map(|&i| self.id_of(i)).collect()
    }

    pub fn is_spawn_entry(&self, id: &str) -> bool {
        self.doc.spawns.iter().any(|s| s.entry == id)
    }

    /// Constants recorded for a call site.
    pub fn consts_at<'a>(&'a self, site: &'a Site) -> impl Iterator<Item = &'a ConstArg> + 'a {
        self.doc.consts.iter().filter(move |c| &c.site == site)
    }

    pub(crate) fn idx(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub(crate) fn id_of(&self, i: usize) -> &str {
        &self.doc.functions[i].id
    }

    pub(crate) fn out_idx(&self, i: usize) -> &[usize] {
        &self.out[i]
    }

    pub(crate) fn in_idx(&self, i: usize) -> &[usize] {
        &self.inc[i]
    }

    pub(crate) fn root_idx(&self) -> &[usize] {
        &self.roots
    }

    pub fn len(&self) -> usize {
        self.doc.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc.functions.is_empty()
    }
}
