use crate::model::{Decoder, ModelParams};
use crate::shcore::Volume;
use crate::{cast3, Error, Real, Result, Vec3};

/// Source of propagation directions. A session holds the context of one
/// streamline being tracked.
pub trait DirectionModel: Sync {
    type Session<'a>: DirectionSession
    where
        Self: 'a;

    fn session(&self) -> Self::Session<'_>;
}

pub trait DirectionSession {
    /// Appends a vertex to the context and returns the raw prediction at it.
    /// A vertex whose features cannot be sampled yields `OutOfBounds`.
    fn push(&mut self, p: &Vec3<f64>) -> Result<Vec3<f64>>;

    fn reset(&mut self);
}

/// Trained network reading 3x3x3 patches from an SH volume.
pub struct NeuralModel<'a, T> {
    params: &'a ModelParams<T>,
    sh: &'a Volume<T>,
}

impl<'a, T: Real> NeuralModel<'a, T> {
    pub fn new(params: &'a ModelParams<T>, sh: &'a Volume<T>) -> Result<Self> {
        let expected = params.config().in_channels;
        if sh.channels() != expected {
            return Err(Error::ConfigMismatch(format!(
                "model expects {expected} channels, volume has {}",
                sh.channels()
            )));
        }
        Ok(Self { params, sh })
    }
}

pub struct NeuralSession<'a, T> {
    decoder: Decoder<'a, T>,
    sh: &'a Volume<T>,
    patch: Vec<T>,
}

impl<T: Real> DirectionModel for NeuralModel<'_, T> {
    type Session<'s>
        = NeuralSession<'s, T>
    where
        Self: 's;

    fn session(&self) -> NeuralSession<'_, T> {
        NeuralSession {
            decoder: Decoder::new(self.params),
            sh: self.sh,
            patch: vec![T::zero(); self.params.config().patch_width()],
        }
    }
}

impl<T: Real> DirectionSession for NeuralSession<'_, T> {
    fn push(&mut self, p: &Vec3<f64>) -> Result<Vec3<f64>> {
        self.sh.extract_neighborhood_into(&cast3(p), &mut self.patch)?;
        let y = self.decoder.push(&self.patch)?;
        Ok(cast3(&y))
    }

    fn reset(&mut self) {
        self.decoder.reset();
    }
}

/// Direction given by a function of the whole context so far (most recent
/// vertex last). Used for analytic fields and ground-truth oracles.
pub struct OracleModel<F> {
    field: F,
}

impl<F> OracleModel<F>
where
    F: Fn(&[Vec3<f64>]) -> Vec3<f64> + Sync,
{
    pub fn new(field: F) -> Self {
        Self { field }
    }
}

pub struct OracleSession<'a, F> {
    field: &'a F,
    context: Vec<Vec3<f64>>,
}

impl<F> DirectionModel for OracleModel<F>
where
    F: Fn(&[Vec3<f64>]) -> Vec3<f64> + Sync,
{
    type Session<'a>
        = OracleSession<'a, F>
    where
        Self: 'a;

    fn session(&self) -> OracleSession<'_, F> {
        OracleSession { field: &self.field, context: Vec::new() }
    }
}

impl<F> DirectionSession for OracleSession<'_, F>
where
    F: Fn(&[Vec3<f64>]) -> Vec3<f64>,
{
    fn push(&mut self, p: &Vec3<f64>) -> Result<Vec3<f64>> {
        self.context.push(*p);
        Ok((self.field)(&self.context))
    }

    fn reset(&mut self) {
        self.context.clear();
    }
}
