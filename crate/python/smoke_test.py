"""Quick check that the extension builds and agrees with the exact solver."""

import json
import math

import idfom_py


def main():
    qp = idfom_py.random_qp(8, 6, seed=3)
    assert qp.dim == 8 and qp.num_constraints == 6

    again = idfom_py.QpProblem.from_json(qp.to_json())
    assert json.loads(again.to_json()) == json.loads(qp.to_json())

    exact = idfom_py.exact_solve(qp)
    for alg in ("idgm", "idfgm"):
        r = idfom_py.solve(qp, algorithm=alg, eps=1e-3, f_ref=exact["f_star"])
        assert r["status"] == "converged", r["status"]
        assert abs(r["f"] - exact["f_star"]) <= 1e-3, (alg, r["f"], exact["f_star"])
        assert r["infeas"] <= 1e-3
        print(f"{alg}: f={r['f']:.6f} f*={exact['f_star']:.6f} outer={r['outer_iterations']}")

    cert = idfom_py.certificate(qp, algorithm="idfgm", recovery="average", eps=1e-2)
    assert cert["delta"] > 0 and cert["outer_bound"] >= 1

    # tiny hand-written problem: min 1/2 u^2 - u  s.t. u <= 0.5, box [-1, 1]
    tiny = idfom_py.QpProblem([[1.0]], [-1.0], [[1.0]], [-0.5], lb=[-1.0], ub=[1.0], cub=[0.0])
    r = idfom_py.solve(tiny, eps=1e-6, delta=1e-12)
    assert math.isclose(r["u"][0], 0.5, abs_tol=1e-4), r["u"]

    try:
        idfom_py.solve(tiny, algorithm="newton")
    except ValueError as e:
        print("bad algorithm rejected:", e)
    else:
        raise AssertionError("expected ValueError")

    sim = idfom_py.simulate_robot(steps=50)
    assert len(sim["u"]) == 50
    assert max(abs(u) for u in sim["u"]) <= 12.0 + 1e-9
    print("robot final state:", [round(v, 4) for v in sim["final_state"]])
    print("ok")


if __name__ == "__main__":
    main()
