"""Tour of the neural substrate: forward, exact backprop, Adam, persistence.

Everything downstream (actors, critics, discriminators) is built from this
one Mlp class, so this demo double-checks the machinery the way the test
suite does: against central finite differences.
"""

import tempfile

import numpy as np

from igasil.net import AdamState, Mlp, adam_step, clip_global_norm

rng = np.random.default_rng(0)

print("== a two-hidden-layer net with a tanh head ==")
net = Mlp([3, 16, 16, 2], output_head="tanh", init_rng=rng)
x = rng.normal(size=3)
y, tape = net.forward(x)
print(f"input  {np.round(x, 3)}")
print(f"output {np.round(y, 3)}  (always inside (-1, 1))")

print("\n== gradients match finite differences ==")
gout = rng.normal(size=2)
grads = net.backward(tape, gout)
probe = net.weights[1]
i, j = 4, 7
h = 1e-6
orig = probe[i, j]
probe[i, j] = orig + h
up = float(net.forward(x)[0] @ gout)
probe[i, j] = orig - h
down = float(net.forward(x)[0] @ gout)
probe[i, j] = orig
numeric = (up - down) / (2 * h)
analytic = grads.weights[1][i, j]
print(f"analytic dL/dw[1][{i},{j}] = {analytic:.10f}")
print(f"numeric  dL/dw[1][{i},{j}] = {numeric:.10f}")

print("\n== fitting a toy function with Adam ==")
target_fn = lambda pts: np.tanh(pts @ np.array([[1.0, -2.0, 0.5], [0.3, 0.8, -1.2]]).T)
train_x = rng.normal(size=(256, 3))
train_y = target_fn(train_x)
state = AdamState([net.flat], alpha=3e-3)
for step in range(400):
    pred, tape = net.forward(train_x)
    err = pred - train_y
    grad = net.backward(tape, 2 * err / len(train_x)).flat
    clip_global_norm([grad], 10.0)
    adam_step([net.flat], [grad], state)
    if step % 100 == 0 or step == 399:
        print(f"step {step:3d}  mse = {float((err * err).mean()):.5f}")

print("\n== save / load round trip ==")
with tempfile.NamedTemporaryFile(suffix=".mlp") as fh:
    net.save(fh.name)
    clone = Mlp.load(fh.name)
probe_x = rng.normal(size=3)
same = np.array_equal(net.predict(probe_x), clone.predict(probe_x))
print(f"identical outputs after reload: {same}")
