from .bsm import (
    binaural_error,
    design_filterbank,
    load_filterbank,
    save_filterbank,
    solve_general,
    solve_ls,
    solve_magls,
)
from .hrtf import (
    load_hrtf,
    on_grid,
    point_receiver_hrtf,
    point_receiver_sh,
    save_hrtf,
    sh_evaluate,
    sh_fit,
    sh_interpolate,
)
from .metrics import (
    band_summary,
    compare,
    nmse,
    octave_bands,
    verdict,
    write_comparison_csv,
    write_report_csv,
)
from .render import (
    apply_filterbank,
    decompose_measurement,
    render_decomposed,
    render_reference,
    render_standard,
)
from .room import (
    add_noise,
    compute_drr,
    compute_image_sources,
    estimate_t60,
    render_mic_signals,
    render_reference_plane_waves,
    room_impulse_response,
    synthesize_source,
)
from .sph import (
    semicircle_array,
    sh_basis,
    sph_to_cart,
    spiral_grid,
    steering_matrix,
    steering_strategy,
    steering_vector,
)
from .stft import istft, stft
