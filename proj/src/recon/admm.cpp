#include <cmath>
#include <stdexcept>

#include "mgre/recon.hpp"

namespace mgre {

void AdmmConfig::validate() const {
    if (n_unrolled < 1) throw std::invalid_argument("n_unrolled must be >= 1");
    if (cg_iters < 1) throw std::invalid_argument("cg_iters must be >= 1");
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be > 0");
}

namespace graph {

ad::Var cg_solve(ad::Var rhs, ad::Var mask, const CoilSet& coils, double rho, std::size_t cg_iters,
                 std::vector<double>* residuals) {
    ad::Tape& tape = *rhs.tape();
    const double shift = 0.5 * rho;
    ad::Var x = tape.constant(ComplexArray(rhs.shape(), cplx{}));
    ad::Var r = rhs;
    ad::Var p = rhs;
    ad::Var rr = ad::inner_re(r, r);
    for (std::size_t it = 0; it < cg_iters; ++it) {
        if (!(rr.real()[0] > 0.0)) {
            if (residuals) residuals->push_back(0.0);
            continue;
        }
        const ad::Var ap = ad::add(ad::normal_op(p, mask, coils), ad::scale(p, shift));
        const ad::Var pap = ad::inner_re(p, ap);
        if (!(pap.real()[0] > 0.0)) break;
        const ad::Var alpha = ad::div(rr, pap);
        x = ad::axpy(x, alpha, p);
        r = ad::axmy(r, alpha, ap);
        const ad::Var rr_next = ad::inner_re(r, r);
        if (residuals) residuals->push_back(std::sqrt(rr_next.real()[0]));
        p = ad::axpy(r, ad::div(rr_next, rr), p);
        rr = rr_next;
    }
    return x;
}

ad::Var admm(ad::Tape& tape, const ComplexArray& b, ad::Var mask, const CoilSet& coils, const AdmmConfig& cfg,
             const DenoiseFn& denoise) {
    cfg.validate();
    const ad::Var aHb = ad::masked_adjoint(b, mask, coils);
    ad::Var v = aHb;
    ad::Var u = tape.constant(ComplexArray(aHb.shape(), cplx{}));
    for (std::size_t t = 0; t < cfg.n_unrolled; ++t) {
        // rhs = A^H b + rho/2 v - u/2
        const ad::Var rhs = ad::add(aHb, ad::sub(ad::scale(v, 0.5 * cfg.rho), ad::scale(u, 0.5)));
        const ad::Var s = cg_solve(rhs, mask, coils, cfg.rho, cfg.cg_iters);
        const ad::Var v_tilde = ad::add(s, ad::scale(u, 1.0 / cfg.rho));
        v = denoise(v_tilde);
        u = ad::add(u, ad::scale(ad::sub(s, v), cfg.rho));
    }
    return v;
}

}  // namespace graph

ComplexArray zero_filled_init(const KSpaceData& b, const CoilSet& coils, const RealArray& masks) {
    return adjoint(b, coils, masks);
}

ComplexArray data_consistency_cg(const KSpaceData& b, const CoilSet& coils, const RealArray& masks,
                                 const ComplexArray& v, const ComplexArray& u, double rho, std::size_t cg_iters,
                                 std::vector<double>* residuals) {
    if (!(rho > 0.0)) throw std::invalid_argument("rho must be > 0");
    if (cg_iters < 1) throw std::invalid_argument("cg_iters must be >= 1");
    ad::Tape tape;
    const ad::Var mask = tape.constant(masks);
    const ad::Var aHb = ad::masked_adjoint(b.data, mask, coils);
    if (v.shape() != aHb.shape() || u.shape() != aHb.shape()) {
        throw std::invalid_argument("v and u must match the image shape " + shape_string(aHb.shape()));
    }
    const ad::Var rhs = ad::add(aHb, ad::sub(ad::scale(tape.constant(v), 0.5 * rho), ad::scale(tape.constant(u), 0.5)));
    tape.check_finite(rhs.id());
    return graph::cg_solve(rhs, mask, coils, rho, cg_iters, residuals).cplx();
}

ComplexArray admm_reconstruct(const KSpaceData& b, const CoilSet& coils, const RealArray& masks,
                              const AdmmConfig& cfg, const Denoiser& denoiser) {
    ad::Tape tape;
    const ad::Var mask = tape.constant(masks);
    graph::DenoiseFn fn;
    graph::TffVars vars;
    if (std::holds_alternative<IdentityDenoiser>(denoiser)) {
        fn = [](ad::Var x) { return x; };
    } else if (const auto* llr = std::get_if<LlrDenoiser>(&denoiser)) {
        const LlrParams params = llr->params;
        fn = [params](ad::Var x) {
            return ad::opaque(x, [params](const ComplexArray& z) { return llr_denoise(z, params); }, "llr");
        };
    } else {
        const auto& w = std::get<TffDenoiser>(denoiser).weights;
        vars = graph::bind(tape, w, false);
        fn = [&vars](ad::Var x) { return graph::tff(x, vars); };
    }
    const ad::Var out = graph::admm(tape, b.data, mask, coils, cfg, fn);
    tape.check_finite(out.id());
    return out.cplx();
}

}  // namespace mgre
