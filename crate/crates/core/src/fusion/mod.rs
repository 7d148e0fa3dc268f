//! Prediction fusion: class means, convex stacking, logistic calibration,
//! the patient-to-nodule update and accuracy-matched operating points.

mod calibration;
mod ops;
mod stacking;

pub use calibration::{fit_calibration, logit, nll, sigmoid, CalibrationParams, CALIBRATION_EPSILON, MAX_SLOPE};
pub use ops::{
    accuracy_sweep, lungrads_equivalent_ops, update_delta, update_nodule_predictions,
    update_nodule_predictions_unclamped, EquivalentOp, UnitRescaler, LUNGRADS_TARGET_ACCURACIES,
};
pub use stacking::{class_mean, fit_stacking, StackingWeights, DIRICHLET_SAMPLES, FINAL_STEP, INITIAL_STEP};
