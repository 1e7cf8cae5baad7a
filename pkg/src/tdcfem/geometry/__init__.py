from .implicit import (
    ImplicitGeometry,
    LevelSet,
    PointFrameImpl,
    extend_normal_field,
    frame_codim1,
    frame_codim2,
    impl_frame_codim1,
    impl_frame_codim2,
    impl_surface_gradients,
)
from .parametric import (
    ParametricPatch,
    PointFrameParam,
    frame_from_jacobian,
    metric_operators,
    param_directional_gradient_vector,
    param_frame,
    param_operators,
    param_surface_gradient_scalar,
    stretch_from_tangents,
    tangent_frame,
)
