//! Multilayer perceptron `F_W : R^q → R^d` with exact first and second
//! derivatives with respect to every scalar weight.
//!
//! # Parameter layout
//!
//! `W` is a flat vector. Layers are stored in order (hidden layers first,
//! then the affine output layer). Within a layer with `fan_in` inputs and
//! `fan_out` units, the `fan_out × fan_in` weight matrix comes first in
//! row-major order (`offset + unit·fan_in + input`), followed by the
//! `fan_out` biases (`offset + fan_out·fan_in + unit`).

use ndarray::{Array1, Array2, ArrayView1};
use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{substream, Purpose};
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Architecture {
    #[serde(rename = "q")]
    pub input_dim: usize,
    #[serde(rename = "hidden")]
    pub hidden_dims: Vec<usize>,
    #[serde(rename = "d")]
    pub output_dim: usize,
    pub activation: Activation,
}

/// Location of one layer's block inside the flat parameter vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LayerShape {
    pub fan_in: usize,
    pub fan_out: usize,
    pub offset: usize,
}

impl LayerShape {
    pub fn weight_index(&self, unit: usize, input: usize) -> usize {
        self.offset + unit * self.fan_in + input
    }

    pub fn bias_index(&self, unit: usize) -> usize {
        self.offset + self.fan_out * self.fan_in + unit
    }

    pub fn len(&self) -> usize {
        (self.fan_in + 1) * self.fan_out
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl Architecture {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize) -> Result<Self> {
        let arch = Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::Tanh,
        };
        arch.validate()?;
        Ok(arch)
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 || self.hidden_dims.contains(&0) {
            return Err(Error::InvalidArgument(format!(
                "architecture dimensions must be positive: q={}, hidden={:?}, d={}",
                self.input_dim, self.hidden_dims, self.output_dim
            )));
        }
        Ok(())
    }

    /// Hidden layers followed by the output layer.
    pub fn layers(&self) -> Vec<LayerShape> {
        let mut out = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut fan_in = self.input_dim;
        let mut offset = 0;
        for &fan_out in self.hidden_dims.iter().chain(std::iter::once(&self.output_dim)) {
            let layer = LayerShape {
                fan_in,
                fan_out,
                offset,
            };
            offset += layer.len();
            fan_in = fan_out;
            out.push(layer);
        }
        out
    }

    pub fn output_layer(&self) -> LayerShape {
        *self.layers().last().expect("at least the output layer")
    }

    /// `Σ (fan_in + 1)·fan_out` over all layers.
    pub fn param_count(&self) -> usize {
        self.layers().iter().map(LayerShape::len).sum()
    }

    pub fn in_output_layer(&self, k: usize) -> bool {
        k >= self.output_layer().offset
    }

    pub fn is_output_bias(&self, k: usize) -> bool {
        let out = self.output_layer();
        k >= out.bias_index(0) && k < out.offset + out.len()
    }
}

/// Flat weight vector tied to its architecture.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector<T> {
    arch: Architecture,
    values: Array1<T>,
}

/// Persisted as `{arch: {q, hidden, d, activation}, values: [..]}`.
impl<T: Serialize> Serialize for ParamVector<T> {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = s.serialize_struct("ParamVector", 2)?;
        st.serialize_field("arch", &self.arch)?;
        st.serialize_field("values", &self.values.iter().collect::<Vec<_>>())?;
        st.end()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams<T> {
    arch: Architecture,
    values: Vec<T>,
}

impl<'de, T: Real + Deserialize<'de>> Deserialize<'de> for ParamVector<T> {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawParams::<T>::deserialize(d)?;
        ParamVector::new(raw.arch, Array1::from(raw.values)).map_err(serde::de::Error::custom)
    }
}

impl<T: Real> ParamVector<T> {
    pub fn new(arch: Architecture, values: Array1<T>) -> Result<Self> {
        arch.validate()?;
        let p = arch.param_count();
        if values.len() != p {
            return Err(Error::dim("parameter vector length", p, values.len()));
        }
        Ok(Self { arch, values })
    }

    pub fn zeros(arch: Architecture) -> Self {
        let p = arch.param_count();
        Self {
            arch,
            values: Array1::zeros(p),
        }
    }

    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    pub fn values(&self) -> &Array1<T> {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Same architecture, new values.
    pub fn with_values(&self, values: Array1<T>) -> Result<Self> {
        Self::new(self.arch.clone(), values)
    }

    pub fn into_values(self) -> Array1<T> {
        self.values
    }

    pub fn cast<U: Real>(&self) -> ParamVector<U> {
        ParamVector {
            arch: self.arch.clone(),
            values: self.values.mapv(|v| U::lit(v.to_f64_lossy())),
        }
    }

    fn check_input(&self, z: ArrayView1<'_, T>) -> Result<()> {
        if z.len() != self.arch.input_dim {
            return Err(Error::dim("MLP input", self.arch.input_dim, z.len()));
        }
        Ok(())
    }

    fn check_index(&self, k: usize) -> Result<()> {
        if k >= self.len() {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.len(),
            });
        }
        Ok(())
    }
}

/// Per-layer activations and activation derivatives from one forward pass.
struct ForwardTrace<T> {
    /// `acts[0] = z`, `acts[ℓ]` = output of hidden layer ℓ.
    acts: Vec<Array1<T>>,
    /// `tanh'` of the pre-activations of each hidden layer.
    slopes: Vec<Array1<T>>,
    output: Array1<T>,
}

fn affine<T: Real>(w: &[T], layer: &LayerShape, x: &Array1<T>) -> Array1<T> {
    Array1::from_shape_fn(layer.fan_out, |i| {
        let row = &w[layer.weight_index(i, 0)..layer.weight_index(i, 0) + layer.fan_in];
        row.iter().zip(x.iter()).map(|(&a, &b)| a * b).sum::<T>() + w[layer.bias_index(i)]
    })
}

fn trace<T: Real>(w: &ParamVector<T>, z: ArrayView1<'_, T>) -> ForwardTrace<T> {
    let layers = w.arch.layers();
    let vals = w.values.as_slice().expect("contiguous parameters");
    let (out_layer, hidden) = layers.split_last().expect("output layer");
    let mut acts = Vec::with_capacity(layers.len());
    let mut slopes = Vec::with_capacity(hidden.len());
    acts.push(z.to_owned());
    for layer in hidden {
        let a = affine(vals, layer, acts.last().unwrap()).mapv(T::tanh);
        slopes.push(a.mapv(|t| T::one() - t * t));
        acts.push(a);
    }
    let output = affine(vals, out_layer, acts.last().unwrap());
    ForwardTrace {
        acts,
        slopes,
        output,
    }
}

/// `F_W(z)`.
pub fn forward<T: Real>(w: &ParamVector<T>, z: ArrayView1<'_, T>) -> Result<Array1<T>> {
    w.check_input(z)?;
    Ok(trace(w, z).output)
}

/// `p × d` matrix whose row `k` is `∂F_W(z)/∂W_k`, by reverse accumulation.
pub fn jacobian<T: Real>(w: &ParamVector<T>, z: ArrayView1<'_, T>) -> Result<Array2<T>> {
    Ok(forward_jacobian(w, z)?.1)
}

/// Output and Jacobian from a single forward/backward sweep.
pub fn forward_jacobian<T: Real>(
    w: &ParamVector<T>,
    z: ArrayView1<'_, T>,
) -> Result<(Array1<T>, Array2<T>)> {
    w.check_input(z)?;
    let d = w.arch.output_dim;
    let mut jac = Array2::zeros((w.len(), d));
    let output = jacobian_into(w, z, &mut jac);
    Ok((output, jac))
}

/// Overwrites every row of `jac` (`p × d`) with the Jacobian and returns `F_W(z)`.
pub(crate) fn jacobian_into<T: Real>(
    w: &ParamVector<T>,
    z: ArrayView1<'_, T>,
    jac: &mut Array2<T>,
) -> Array1<T> {
    let tr = trace(w, z);
    let layers = w.arch.layers();
    let vals = w.values.as_slice().expect("contiguous parameters");
    let d = w.arch.output_dim;

    // sens[:, i] = ∂F/∂s_i for the pre-activations s of the current layer.
    let mut sens = Array2::<T>::eye(d);
    for (li, layer) in layers.iter().enumerate().rev() {
        let input = &tr.acts[li];
        for i in 0..layer.fan_out {
            let col = sens.column(i);
            for j in 0..layer.fan_in {
                let x = input[j];
                let mut row = jac.row_mut(layer.weight_index(i, j));
                row.iter_mut().zip(col.iter()).for_each(|(r, &c)| *r = c * x);
            }
            jac.row_mut(layer.bias_index(i)).assign(&col);
        }
        if li == 0 {
            break;
        }
        let slope = &tr.slopes[li - 1];
        let mut prev = Array2::<T>::zeros((d, layer.fan_in));
        for j in 0..layer.fan_in {
            for i in 0..layer.fan_out {
                let wij = vals[layer.weight_index(i, j)];
                for o in 0..d {
                    prev[[o, j]] += sens[[o, i]] * wij;
                }
            }
            for o in 0..d {
                prev[[o, j]] *= slope[j];
            }
        }
        sens = prev;
    }
    tr.output
}

/// Second-order forward-mode number carrying `∂/∂W_k`, `∂/∂W_l` and
/// `∂²/∂W_k∂W_l`.
#[derive(Debug, Clone, Copy)]
struct HyperDual<T> {
    v: T,
    dk: T,
    dl: T,
    dkl: T,
}

impl<T: Real> HyperDual<T> {
    fn constant(v: T) -> Self {
        Self {
            v,
            dk: T::zero(),
            dl: T::zero(),
            dkl: T::zero(),
        }
    }

    fn param(v: T, idx: usize, k: usize, l: usize) -> Self {
        let unit = |b: bool| if b { T::one() } else { T::zero() };
        Self {
            v,
            dk: unit(idx == k),
            dl: unit(idx == l),
            dkl: T::zero(),
        }
    }

    fn add(self, o: Self) -> Self {
        Self {
            v: self.v + o.v,
            dk: self.dk + o.dk,
            dl: self.dl + o.dl,
            dkl: self.dkl + o.dkl,
        }
    }

    fn mul(self, o: Self) -> Self {
        Self {
            v: self.v * o.v,
            dk: self.v * o.dk + self.dk * o.v,
            dl: self.v * o.dl + self.dl * o.v,
            dkl: self.v * o.dkl + self.dk * o.dl + self.dl * o.dk + self.dkl * o.v,
        }
    }

    fn tanh(self) -> Self {
        let f = self.v.tanh();
        let f1 = T::one() - f * f;
        let f2 = -T::lit(2.0) * f * f1;
        Self {
            v: f,
            dk: f1 * self.dk,
            dl: f1 * self.dl,
            dkl: f1 * self.dkl + f2 * self.dk * self.dl,
        }
    }
}

/// `∂²F_W(z)/∂W_k∂W_l`, exact, symmetric in `(k, l)`.
pub fn second_derivative<T: Real>(
    w: &ParamVector<T>,
    z: ArrayView1<'_, T>,
    k: usize,
    l: usize,
) -> Result<Array1<T>> {
    w.check_input(z)?;
    w.check_index(k)?;
    w.check_index(l)?;
    Ok(second_derivative_unchecked(w, z, k, l))
}

pub(crate) fn second_derivative_unchecked<T: Real>(
    w: &ParamVector<T>,
    z: ArrayView1<'_, T>,
    k: usize,
    l: usize,
) -> Array1<T> {
    let arch = &w.arch;
    let d = arch.output_dim;
    // The output layer is affine in its own parameters and output biases
    // enter with a constant derivative.
    if (arch.in_output_layer(k) && arch.in_output_layer(l))
        || arch.is_output_bias(k)
        || arch.is_output_bias(l)
    {
        return Array1::zeros(d);
    }
    // Order so that k ≤ l; the computation is symmetric anyway but this makes
    // (k, l) and (l, k) bitwise identical.
    let (k, l) = if k <= l { (k, l) } else { (l, k) };
    let vals = w.values.as_slice().expect("contiguous parameters");
    let layers = arch.layers();
    let mut x: Vec<HyperDual<T>> = z.iter().map(|&v| HyperDual::constant(v)).collect();
    let last = layers.len() - 1;
    for (li, layer) in layers.iter().enumerate() {
        let mut next = Vec::with_capacity(layer.fan_out);
        for i in 0..layer.fan_out {
            let bi = layer.bias_index(i);
            let mut s = HyperDual::param(vals[bi], bi, k, l);
            for (j, xj) in x.iter().enumerate() {
                let wi = layer.weight_index(i, j);
                s = s.add(HyperDual::param(vals[wi], wi, k, l).mul(*xj));
            }
            next.push(if li == last { s } else { s.tanh() });
        }
        x = next;
    }
    x.iter().map(|h| h.dkl).collect()
}

/// Random initial weights: weights of a layer uniform on
/// `(−0.7/√fan_in, 0.7/√fan_in)`, biases uniform on `(−0.1, 0.1)`.
pub fn init_random<T: Real>(arch: &Architecture, seed: u64) -> ParamVector<T> {
    init_random_stream(arch, seed, 0)
}

/// [`init_random`] for the `index`-th independent stream under `seed`.
pub fn init_random_stream<T: Real>(arch: &Architecture, seed: u64, index: u64) -> ParamVector<T> {
    let mut rng = substream(seed, Purpose::Init, index);
    let mut values = Array1::zeros(arch.param_count());
    let bias = Uniform::new(-0.1, 0.1).expect("valid bias range");
    for layer in arch.layers() {
        let a = 0.7 / (layer.fan_in as f64).sqrt();
        let weight = Uniform::new(-a, a).expect("valid weight range");
        for i in 0..layer.fan_out {
            for j in 0..layer.fan_in {
                values[layer.weight_index(i, j)] = T::lit(open_sample(&weight, -a, &mut rng));
            }
        }
        for i in 0..layer.fan_out {
            values[layer.bias_index(i)] = T::lit(open_sample(&bias, -0.1, &mut rng));
        }
    }
    ParamVector {
        arch: arch.clone(),
        values,
    }
}

// `Uniform::new` is half-open; reject the lower endpoint to keep the interval open.
fn open_sample<R: Rng>(dist: &Uniform<f64>, low: f64, rng: &mut R) -> f64 {
    loop {
        let v = dist.sample(rng);
        if v != low {
            return v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tiny() -> Architecture {
        Architecture::new(1, vec![1], 1).unwrap()
    }

    #[test]
    fn param_count_and_layout() {
        let arch = Architecture::new(3, vec![4, 2], 2).unwrap();
        assert_eq!(arch.param_count(), 4 * 4 + 5 * 2 + 3 * 2);
        let layers = arch.layers();
        assert_eq!(layers[1].offset, 16);
        assert_eq!(layers[2].offset, 26);
        assert_eq!(layers[2].weight_index(1, 0), 28);
        assert_eq!(layers[2].bias_index(1), 31);
        assert!(arch.in_output_layer(26));
        assert!(!arch.in_output_layer(25));
        assert!(arch.is_output_bias(30) && !arch.is_output_bias(29));
    }

    #[test]
    fn zero_dims_are_rejected() {
        assert!(Architecture::new(0, vec![2], 1).is_err());
        assert!(Architecture::new(1, vec![0], 1).is_err());
        assert!(Architecture::new(1, vec![2], 0).is_err());
        assert!(ParamVector::new(tiny(), array![1.0, 2.0]).is_err());
    }

    #[test]
    fn forward_examples() {
        let arch = Architecture::new(2, vec![3], 2).unwrap();
        let zero = ParamVector::<f64>::zeros(arch);
        assert_eq!(forward(&zero, array![0.4, -1.0].view()).unwrap(), array![0.0, 0.0]);

        // hidden weight 1, hidden bias 0, output weight 1, output bias 0
        let w = ParamVector::<f64>::new(tiny(), array![1.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(forward(&w, array![0.0].view()).unwrap()[0], 0.0);
        let y = forward(&w, array![1.0].view()).unwrap()[0];
        assert!((y - 0.761_594_156_0).abs() < 1e-10);

        assert!(matches!(
            forward(&w, array![1.0, 2.0].view()),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn output_bias_rows_are_unit_vectors() {
        let arch = Architecture::new(2, vec![3], 3).unwrap();
        let w = init_random::<f64>(&arch, 3);
        let out = arch.output_layer();
        for z in [array![0.0, 0.0], array![2.5, -1.0]] {
            let jac = jacobian(&w, z.view()).unwrap();
            for j in 0..3 {
                let row = jac.row(out.bias_index(j));
                for o in 0..3 {
                    assert_eq!(row[o], if o == j { 1.0 } else { 0.0 });
                }
            }
        }
    }

    #[test]
    fn zero_weights_kill_output_weight_rows() {
        let arch = Architecture::new(2, vec![3], 2).unwrap();
        let w = ParamVector::<f64>::zeros(arch.clone());
        let jac = jacobian(&w, array![1.3, -0.2].view()).unwrap();
        let out = arch.output_layer();
        for j in 0..2 {
            for i in 0..3 {
                assert!(jac.row(out.weight_index(j, i)).iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn jacobian_matches_hand_derivative() {
        // F = v·tanh(a z + b) + c
        let (a, b, v, c): (f64, f64, f64, f64) = (0.8, -0.3, 1.7, 0.2);
        let w = ParamVector::new(tiny(), array![a, b, v, c]).unwrap();
        let z: f64 = 1.4;
        let t: f64 = (a * z + b).tanh();
        let jac = jacobian(&w, array![z].view()).unwrap();
        let expect = [v * (1.0 - t * t) * z, v * (1.0 - t * t), t, 1.0];
        for (k, e) in expect.iter().enumerate() {
            assert!((jac[[k, 0]] - e).abs() < 1e-15, "k={k}");
        }
    }

    #[test]
    fn second_derivative_examples() {
        let arch = Architecture::new(2, vec![2], 2).unwrap();
        let w = init_random::<f64>(&arch, 11);
        let z = array![0.7, -1.1];
        let out = arch.output_layer();
        let zero = Array1::<f64>::zeros(2);
        let b0 = out.bias_index(0);
        let b1 = out.bias_index(1);
        assert_eq!(second_derivative(&w, z.view(), b0, b1).unwrap(), zero);
        let wo = out.weight_index(1, 0);
        assert_eq!(second_derivative(&w, z.view(), wo, wo).unwrap(), zero);
        assert!(matches!(
            second_derivative(&w, z.view(), 0, w.len()),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn second_derivative_matches_hand_formula() {
        // F = v·tanh(a z + b) + c; ∂²F/∂a² = v·tanh''(s)·z², ∂²F/∂a∂v = tanh'(s)·z
        let (a, b, v, c): (f64, f64, f64, f64) = (0.8, -0.3, 1.7, 0.2);
        let w = ParamVector::new(tiny(), array![a, b, v, c]).unwrap();
        let z: f64 = 1.4;
        let t: f64 = (a * z + b).tanh();
        let t1 = 1.0 - t * t;
        let t2 = -2.0 * t * t1;
        let zz = array![z];
        let aa = second_derivative(&w, zz.view(), 0, 0).unwrap()[0];
        let av = second_derivative(&w, zz.view(), 0, 2).unwrap()[0];
        let ab = second_derivative(&w, zz.view(), 1, 0).unwrap()[0];
        assert!((aa - v * t2 * z * z).abs() < 1e-14);
        assert!((av - t1 * z).abs() < 1e-14);
        assert!((ab - v * t2 * z).abs() < 1e-14);
    }

    #[test]
    fn init_random_is_seeded() {
        let arch = Architecture::new(2, vec![3], 2).unwrap();
        let a = init_random::<f64>(&arch, 5);
        assert_eq!(a, init_random::<f64>(&arch, 5));
        assert_ne!(a, init_random::<f64>(&arch, 6));
    }

    #[test]
    fn single_precision_forward() {
        let w = ParamVector::new(tiny(), array![1.0f32, 0.0, 1.0, 0.0]).unwrap();
        let y = forward(&w, array![1.0f32].view()).unwrap()[0];
        assert!((y - 0.761_594_2).abs() < 1e-6);
    }

    #[test]
    fn weights_json_round_trip_and_length_check() {
        let arch = Architecture::new(1, vec![2], 2).unwrap();
        let w = init_random::<f64>(&arch, 3);
        let text = serde_json::to_string(&w).unwrap();
        assert!(text.starts_with(r#"{"arch":{"q":1,"hidden":[2],"d":2,"activation":"tanh"},"values":["#), "{text}");
        let back: ParamVector<f64> = serde_json::from_str(&text).unwrap();
        assert_eq!(back, w);
        let short = r#"{"arch":{"q":1,"hidden":[2],"d":2,"activation":"tanh"},"values":[1.0]}"#;
        assert!(serde_json::from_str::<ParamVector<f64>>(short).is_err());
    }
}
