"""
Feature-consistency loss and low-rank weight merging
====================================================

The training-side arithmetic on plain tensors: the teacher-student
consistency objective over encoder/decoder/correspondence features, and
folding a low-rank adapter update into a frozen weight matrix.
"""

import numpy as np

from darksfm.adaptation import FeatureBundle, LoraDelta, distill_loss, lora_merge

rng = np.random.default_rng(13)


def bundle(offset=0.0, noise=0.0):
    base = {
        "encoder": rng.standard_normal((2, 8, 8, 16)),
        "decoder": rng.standard_normal((2, 8, 8, 24)),
        "correspondence": rng.standard_normal((2, 8, 8, 12)),
    }
    return base


teacher_arrays = bundle()
teacher = FeatureBundle(**teacher_arrays)

# the noisy-input student drifts more than the clean-input student
student_noisy = FeatureBundle(
    **{k: v + 0.3 * rng.standard_normal(v.shape) for k, v in teacher_arrays.items()}
)
student_clean = FeatureBundle(
    **{k: v + 0.05 * rng.standard_normal(v.shape) for k, v in teacher_arrays.items()}
)

loss = distill_loss(teacher, student_noisy, student_clean, lambda_clean=0.3)
print(f"noisy-term {loss.noisy:.1f}, clean-term {loss.clean:.1f}, total {loss.total:.1f}")
print("total equals noisy + 0.3 * clean:",
      abs(loss.total - (loss.noisy + 0.3 * loss.clean)) < 1e-9)

# per-tensor mean reduction equalizes tensors of different depth
loss_mean = distill_loss(teacher, student_noisy, student_clean, per_tensor_mean=True)
print(f"per-tensor-mean total: {loss_mean.total:.5f}")

# rank-4 adapter folded into a 64x64 base matrix
W = rng.standard_normal((64, 64))
down = rng.standard_normal((4, 64))
up = rng.standard_normal((64, 4))
merged = lora_merge(LoraDelta(base=W, down=down, up=up, alpha=8.0))
update = merged - W
print(f"update rank: {np.linalg.matrix_rank(update)} (adapter rank 4)")
print(f"update magnitude: {np.linalg.norm(update):.2f} "
      f"(alpha/r scaling = {8.0 / 4:.1f})")
