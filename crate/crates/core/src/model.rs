//! The split model: a ReLU feature extractor followed by one linear classifier.
//!
//! The extractor/classifier boundary is fixed at construction. Exchange
//! operations move whole parts between two models in place.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::{linear_backward, linear_forward, relu, relu_backward, GradBundle, LinearLayer};
use crate::tensor::Tensor;

/// Hidden widths used when none are configured; the last entry is the
/// feature dimension.
pub const DEFAULT_HIDDEN: [usize; 2] = [64, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct SplitModel {
    extractor: Vec<LinearLayer>,
    classifier: LinearLayer,
}

/// Intermediate values kept from a forward pass for backpropagation.
pub struct ForwardCache {
    /// Input of every extractor layer; `inputs[0]` is the batch itself.
    inputs: Vec<Tensor>,
    /// Pre-activation output of every extractor layer.
    pre_activations: Vec<Tensor>,
    pub features: Tensor,
    pub logits: Tensor,
}

impl SplitModel {
    pub fn new(extractor: Vec<LinearLayer>, classifier: LinearLayer) -> Result<Self> {
        if extractor.is_empty() {
            return Err(Error::Validation(
                "extractor needs at least one layer".into(),
            ));
        }
        for pair in extractor.windows(2) {
            if pair[0].outputs() != pair[1].inputs() {
                return Err(Error::dim(
                    "extractor chain",
                    pair[0].outputs(),
                    pair[1].inputs(),
                ));
            }
        }
        let features = extractor.last().map(LinearLayer::outputs).unwrap_or(0);
        if classifier.inputs() != features {
            return Err(Error::dim(
                "classifier input width",
                features,
                classifier.inputs(),
            ));
        }
        Ok(Self {
            extractor,
            classifier,
        })
    }

    /// Glorot-initialised model `input → hidden[0] → … → hidden[n-1] → classes`.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        classes: usize,
        rng: &mut R,
    ) -> Result<Self> {
        if hidden.is_empty() || hidden.contains(&0) || input_dim == 0 || classes == 0 {
            return Err(Error::Validation(format!(
                "invalid architecture {input_dim} -> {hidden:?} -> {classes}"
            )));
        }
        let mut extractor = Vec::with_capacity(hidden.len());
        let mut width = input_dim;
        for &h in hidden {
            extractor.push(LinearLayer::glorot(width, h, rng));
            width = h;
        }
        let classifier = LinearLayer::glorot(width, classes, rng);
        Self::new(extractor, classifier)
    }

    pub fn extractor(&self) -> &[LinearLayer] {
        &self.extractor
    }

    pub fn classifier(&self) -> &LinearLayer {
        &self.classifier
    }

    pub fn input_dim(&self) -> usize {
        self.extractor[0].inputs()
    }

    pub fn feature_dim(&self) -> usize {
        self.classifier.inputs()
    }

    pub fn num_classes(&self) -> usize {
        self.classifier.outputs()
    }

    pub fn forward_features(&self, x: &Tensor) -> Result<Tensor> {
        let mut h = x.clone();
        for layer in &self.extractor {
            h = relu(&linear_forward(&h, layer)?);
        }
        Ok(h)
    }

    pub fn forward_logits(&self, features: &Tensor) -> Result<Tensor> {
        linear_forward(features, &self.classifier)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.forward_logits(&self.forward_features(x)?)
    }

    /// Argmax class per row; ties go to the lowest class id.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.forward(x)?;
        Ok((0..logits.rows()).map(|r| argmax(logits.row(r))).collect())
    }

    pub fn forward_train(&self, x: &Tensor) -> Result<ForwardCache> {
        let mut inputs = Vec::with_capacity(self.extractor.len());
        let mut pre_activations = Vec::with_capacity(self.extractor.len());
        let mut h = x.clone();
        for layer in &self.extractor {
            let z = linear_forward(&h, layer)?;
            let a = relu(&z);
            inputs.push(h);
            pre_activations.push(z);
            h = a;
        }
        let logits = linear_forward(&h, &self.classifier)?;
        Ok(ForwardCache {
            inputs,
            pre_activations,
            features: h,
            logits,
        })
    }

    /// Backpropagates `dlogits` through the classifier and extractor.
    ///
    /// `dfeatures` is an extra gradient on the extracted features (the
    /// alignment loss); it reaches the extractor only. The returned bundle
    /// follows [`SplitModel::parameters`] order.
    pub fn backward(
        &self,
        cache: &ForwardCache,
        dlogits: &Tensor,
        dfeatures: Option<&Tensor>,
    ) -> Result<GradBundle> {
        let head = linear_backward(&cache.features, &self.classifier, dlogits)?;
        let mut upstream = head.input;
        if let Some(extra) = dfeatures {
            if !extra.same_shape(&upstream) {
                return Err(Error::dim(
                    "feature gradient",
                    format!("{:?}", upstream.shape()),
                    format!("{:?}", extra.shape()),
                ));
            }
            for (u, e) in upstream.data_mut().iter_mut().zip(extra.data()) {
                *u += e;
            }
        }

        let mut layer_grads = Vec::with_capacity(self.extractor.len());
        for (i, layer) in self.extractor.iter().enumerate().rev() {
            let dz = relu_backward(&cache.pre_activations[i], &upstream)?;
            let g = linear_backward(&cache.inputs[i], layer, &dz)?;
            upstream = g.input;
            layer_grads.push((g.weights, g.bias));
        }
        let mut grads = Vec::with_capacity(2 * self.extractor.len() + 2);
        for (w, b) in layer_grads.into_iter().rev() {
            grads.push(w);
            grads.push(b);
        }
        grads.push(head.weights);
        grads.push(head.bias);
        Ok(GradBundle { grads })
    }

    /// Parameter tensors: extractor weight/bias pairs, then classifier.
    pub fn parameters(&self) -> Vec<&Tensor> {
        self.extractor
            .iter()
            .chain(std::iter::once(&self.classifier))
            .flat_map(|l| [&l.weights, &l.bias])
            .collect()
    }

    pub fn parameters_mut(&mut self) -> Vec<&mut Tensor> {
        self.extractor
            .iter_mut()
            .chain(std::iter::once(&mut self.classifier))
            .flat_map(|l| [&mut l.weights, &mut l.bias])
            .collect()
    }

    pub fn num_parameters(&self) -> usize {
        self.parameters().iter().map(|t| t.len()).sum()
    }

    fn same_extractor_shape(&self, other: &SplitModel) -> bool {
        self.extractor.len() == other.extractor.len()
            && self
                .extractor
                .iter()
                .zip(&other.extractor)
                .all(|(a, b)| a.same_shape(b))
    }

    pub fn layout(&self) -> Layout {
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |part: Part, slot: Slot, t: &Tensor| {
            segments.push(Segment {
                part,
                slot,
                shape: t.shape().to_vec(),
                offset,
            });
            offset += t.len();
        };
        for (i, l) in self.extractor.iter().enumerate() {
            push(Part::Extractor(i), Slot::Weights, &l.weights);
            push(Part::Extractor(i), Slot::Bias, &l.bias);
        }
        push(Part::Classifier, Slot::Weights, &self.classifier.weights);
        push(Part::Classifier, Slot::Bias, &self.classifier.bias);
        Layout {
            segments,
            len: offset,
        }
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Exchanges the classifiers of two models in place.
pub fn swap_classifiers(a: &mut SplitModel, b: &mut SplitModel) -> Result<()> {
    if !a.classifier.same_shape(&b.classifier) {
        return Err(Error::dim(
            "swap_classifiers",
            format!("{:?}", a.classifier.weights.shape()),
            format!("{:?}", b.classifier.weights.shape()),
        ));
    }
    std::mem::swap(&mut a.classifier, &mut b.classifier);
    Ok(())
}

/// Exchanges the feature extractors of two models in place.
pub fn swap_extractors(a: &mut SplitModel, b: &mut SplitModel) -> Result<()> {
    if !a.same_extractor_shape(b) {
        return Err(Error::dim(
            "swap_extractors",
            "matching extractor",
            "different extractor",
        ));
    }
    std::mem::swap(&mut a.extractor, &mut b.extractor);
    Ok(())
}

pub fn swap_whole(a: &mut SplitModel, b: &mut SplitModel) -> Result<()> {
    if !a.same_extractor_shape(b) || !a.classifier.same_shape(&b.classifier) {
        return Err(Error::dim(
            "swap_whole",
            "matching architecture",
            "different architecture",
        ));
    }
    std::mem::swap(a, b);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Extractor(usize),
    Classifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Slot {
    Weights,
    Bias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub part: Part,
    pub slot: Slot,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Where each parameter tensor lives inside a [`ParamVector`]. Extractor
/// segments always precede classifier segments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    segments: Vec<Segment>,
    len: usize,
}

impl Layout {
    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Length of the extractor prefix; the classifier occupies the rest.
    pub fn extractor_len(&self) -> usize {
        self.segments
            .iter()
            .find(|s| s.part == Part::Classifier)
            .map_or(self.len, |s| s.offset)
    }
}

/// Flat parameter buffer plus the layout needed to rebuild the model.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector {
    values: Vec<f64>,
    layout: Layout,
}

impl ParamVector {
    pub fn new(values: Vec<f64>, layout: Layout) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::Validation(format!(
                "parameter buffer of {} entries does not fit layout of {}",
                values.len(),
                layout.len()
            )));
        }
        Ok(Self { values, layout })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn extractor(&self) -> &[f64] {
        &self.values[..self.layout.extractor_len()]
    }

    pub fn classifier(&self) -> &[f64] {
        &self.values[self.layout.extractor_len()..]
    }
}

pub fn flatten(model: &SplitModel) -> ParamVector {
    let layout = model.layout();
    let mut values = Vec::with_capacity(layout.len());
    for t in model.parameters() {
        values.extend_from_slice(t.data());
    }
    ParamVector { values, layout }
}

/// Rebuilds a model shaped like `template` from `params`.
pub fn unflatten(params: &ParamVector, template: &SplitModel) -> Result<SplitModel> {
    if params.layout != template.layout() {
        return Err(Error::Validation(
            "parameter layout does not match the template model".into(),
        ));
    }
    let mut model = template.clone();
    for (t, seg) in model
        .parameters_mut()
        .into_iter()
        .zip(params.layout.segments())
    {
        let src = &params.values[seg.range()];
        if !src.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "unflatten",
                index: seg.offset,
            });
        }
        t.data_mut().copy_from_slice(src);
    }
    Ok(model)
}
