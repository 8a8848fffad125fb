//! Finite-difference verification of the reverse-mode gradients.

use std::collections::BTreeMap;

use ndarray::Array2;

use super::adam::ParameterStore;
use super::graph::{Graph, NnError, TensorId};

/// A differentiable scalar function of the parameter store: builds a
/// fresh graph, binds the parameters it uses, and returns the loss node.
pub trait LossFn {
    fn build(&self, graph: &mut Graph, binder: &mut Binder) -> Result<TensorId, NnError>;
}

impl<F> LossFn for F
where
    F: Fn(&mut Graph, &mut Binder) -> Result<TensorId, NnError>,
{
    fn build(&self, graph: &mut Graph, binder: &mut Binder) -> Result<TensorId, NnError> {
        self(graph, binder)
    }
}

/// Binds store parameters into a graph and remembers which node carries
/// which parameter, so gradients can be read back by name.
pub struct Binder<'a> {
    pub store: &'a ParameterStore,
    bound: BTreeMap<String, TensorId>,
}

impl<'a> Binder<'a> {
    pub fn new(store: &'a ParameterStore) -> Self {
        Binder { store, bound: BTreeMap::new() }
    }

    pub fn param(&mut self, graph: &mut Graph, name: &str) -> TensorId {
        if let Some(&id) = self.bound.get(name) {
            return id;
        }
        let p = self.store.get(name).unwrap_or_else(|| panic!("unknown parameter {name}"));
        let id = graph.leaf(p.value.clone());
        self.bound.insert(name.to_string(), id);
        id
    }

    pub fn bound(&self) -> &BTreeMap<String, TensorId> {
        &self.bound
    }
}

/// Analytic gradients of a loss over every trainable parameter it binds.
/// Parameters the loss never touches get zero gradients.
pub fn gradients<L: LossFn>(
    store: &ParameterStore,
    loss_fn: &L,
) -> Result<(f64, BTreeMap<String, Array2<f64>>), NnError> {
    let mut graph = Graph::new();
    let mut binder = Binder::new(store);
    let loss = loss_fn.build(&mut graph, &mut binder)?;
    let loss_value = graph.value(loss)[(0, 0)];
    graph.backward(loss)?;
    let mut grads = BTreeMap::new();
    for (name, &id) in binder.bound() {
        if !store.get(name).unwrap().frozen {
            grads.insert(name.clone(), graph.grad(id).clone());
        }
    }
    Ok((loss_value, grads))
}

fn loss_value<L: LossFn>(store: &ParameterStore, loss_fn: &L) -> Result<f64, NnError> {
    let mut graph = Graph::new();
    let mut binder = Binder::new(store);
    let loss = loss_fn.build(&mut graph, &mut binder)?;
    Ok(graph.value(loss)[(0, 0)])
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub worst_param: String,
    pub checked_elements: usize,
}

/// Central-difference check of every trainable parameter element the loss
/// binds. Relative error uses max(|analytic|, |numeric|, 1e-6) as the
/// scale: below 1e-6 the difference quotient is dominated by f64 roundoff
/// in the loss (≈ eps·|loss|/step), so near-zero gradients are compared at
/// that absolute scale instead, and dead parameters report zero error.
pub fn grad_check<L: LossFn>(
    store: &ParameterStore,
    loss_fn: &L,
    epsilon: f64,
) -> Result<GradCheckReport, NnError> {
    let (_, analytic) = gradients(store, loss_fn)?;
    let mut work = store.clone();
    let mut max_rel_err = 0.0f64;
    let mut worst_param = String::new();
    let mut checked = 0usize;

    let names: Vec<String> = analytic.keys().cloned().collect();
    for name in names {
        let len = work.params[&name].value.len();
        for i in 0..len {
            let orig = work.params[&name].value.as_slice().unwrap()[i];
            work.params.get_mut(&name).unwrap().value.as_slice_mut().unwrap()[i] = orig + epsilon;
            let plus = loss_value(&work, loss_fn)?;
            work.params.get_mut(&name).unwrap().value.as_slice_mut().unwrap()[i] = orig - epsilon;
            let minus = loss_value(&work, loss_fn)?;
            work.params.get_mut(&name).unwrap().value.as_slice_mut().unwrap()[i] = orig;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[&name].as_slice().unwrap()[i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
            if rel > max_rel_err {
                max_rel_err = rel;
                worst_param = name.clone();
            }
            checked += 1;
        }
    }
    Ok(GradCheckReport { max_rel_err, worst_param, checked_elements: checked })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_rng;

    #[test]
    fn linear_layer_gradients_are_tight() {
        let mut rng = derive_rng(1, "gradcheck-linear", 0);
        let mut store = ParameterStore::new();
        store.get_or_init("w", 3, 4, &mut rng);
        store.get_or_init("b", 1, 4, &mut rng);
        let x = Array2::from_shape_fn((2, 3), |(i, j)| (i as f64 - j as f64) * 0.3);

        let loss_fn = move |g: &mut Graph, binder: &mut Binder| {
            let w = binder.param(g, "w");
            let b = binder.param(g, "b");
            let xid = g.leaf(x.clone());
            let h = g.matmul(xid, w)?;
            let h = g.add_row(h, b)?;
            Ok(g.mean(h))
        };
        let report = grad_check(&store, &loss_fn, 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }

    #[test]
    fn two_layer_network_matches_finite_differences() {
        let mut rng = derive_rng(2, "gradcheck-mlp", 0);
        let mut store = ParameterStore::new();
        store.get_or_init("w1", 4, 8, &mut rng);
        store.get_or_init("b1", 1, 8, &mut rng);
        store.get_or_init("w2", 8, 2, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |(i, j)| ((i * 7 + j) as f64 * 0.37).sin());

        let loss_fn = move |g: &mut Graph, binder: &mut Binder| {
            let w1 = binder.param(g, "w1");
            let b1 = binder.param(g, "b1");
            let w2 = binder.param(g, "w2");
            let xid = g.leaf(x.clone());
            let h = g.matmul(xid, w1)?;
            let h = g.add_row(h, b1)?;
            let h = g.gelu(h);
            let h = g.layer_norm(h);
            let out = g.matmul(h, w2)?;
            let sm = g.softmax(out);
            // weight the softmax so the loss is not a row-sum constant
            let mask = g.leaf(Array2::from_shape_fn((3, 2), |(i, j)| (i + 2 * j) as f64 - 1.5));
            let weighted = g.mul(sm, mask)?;
            let a = g.abs(weighted);
            Ok(g.mean(a))
        };
        let report = grad_check(&store, &loss_fn, 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-4, "{report:?}");
    }

    #[test]
    fn dead_branch_reports_zero_both_sides() {
        let mut rng = derive_rng(3, "gradcheck-dead", 0);
        let mut store = ParameterStore::new();
        store.get_or_init("live", 1, 2, &mut rng);
        store.get_or_init("dead", 1, 2, &mut rng);

        let loss_fn = |g: &mut Graph, binder: &mut Binder| {
            let live = binder.param(g, "live");
            let _dead = binder.param(g, "dead"); // bound but unused
            let sq = g.mul(live, live)?;
            Ok(g.sum(sq))
        };
        let (_, grads) = gradients(&store, &loss_fn).unwrap();
        assert!(grads["dead"].iter().all(|&g| g == 0.0));
        let report = grad_check(&store, &loss_fn, 1e-5).unwrap();
        assert!(report.max_rel_err < 1e-6, "{report:?}");
    }
}
