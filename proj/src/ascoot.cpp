#include "driftbench/ascoot.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "driftbench/errors.hpp"

namespace driftbench::ascoot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHardTol = 1e-8;  // indicator tolerance on hard marginals

double lse(const Vector& terms) {
    double m = -kInf;
    for (double t : terms) m = std::max(m, t);
    if (!std::isfinite(m)) return m;  // all -inf
    double s = 0.0;
    for (double t : terms) s += std::exp(t - m);
    return m + std::log(s);
}

void check_marginal(const Vector& w, const char* name) {
    double sum = 0.0;
    for (double v : w) {
        if (!(v > 0.0)) throw InvalidInputError(std::string(name) + " must be strictly positive");
        sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-12)
        throw InvalidInputError(std::string(name) + " must sum to 1 (got " + std::to_string(sum) + ")");
}

// Generalized KL: sum a log(a/b) - a + b, with 0 log 0 = 0.
double gen_kl(const Vector& a, const Vector& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > 0.0) s += a[i] * std::log(a[i] / b[i]) - a[i] + b[i];
        else s += b[i];
    }
    return s;
}

Vector row_sums(const Matrix& m) {
    Vector r(m.rows, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) r[i] += m(i, j);
    return r;
}

Vector col_sums(const Matrix& m) {
    Vector c(m.cols, 0.0);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) c[j] += m(i, j);
    return c;
}

double max_abs_diff(const Vector& a, const Vector& b) {
    double d = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::fabs(a[i] - b[i]));
    return d;
}

Matrix outer(const Vector& a, const Vector& b) {
    Matrix m(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i)
        for (std::size_t j = 0; j < b.size(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

}  // namespace

void TransportProblem::validate() const {
    if (x.rows != mu.size()) throw InvalidInputError("problem: mu length must match rows of x");
    if (e.rows != nu.size()) throw InvalidInputError("problem: nu length must match rows of e");
    if (x.cols != mu_f.size()) throw InvalidInputError("problem: mu_f length must match cols of x");
    if (e.cols != nu_f.size()) throw InvalidInputError("problem: nu_f length must match cols of e");
    if (!linalg::all_finite(x) || !linalg::all_finite(e))
        throw InvalidInputError("problem: non-finite features");
    check_marginal(mu, "mu");
    check_marginal(nu, "nu");
    check_marginal(mu_f, "mu_f");
    check_marginal(nu_f, "nu_f");
    if (!(lambda1 > 0.0)) throw InvalidInputError("problem: lambda1 must be > 0");
    if (!(epsilon > 0.0) || !std::isfinite(epsilon))
        throw InvalidInputError("problem: epsilon must be finite and > 0");
}

TransportProblem TransportProblem::with_uniform_marginals(Matrix x, Matrix e, double lambda1,
                                                          double epsilon) {
    TransportProblem p;
    p.mu = Vector(x.rows, 1.0 / static_cast<double>(x.rows));
    p.nu = Vector(e.rows, 1.0 / static_cast<double>(e.rows));
    p.mu_f = Vector(x.cols, 1.0 / static_cast<double>(x.cols));
    p.nu_f = Vector(e.cols, 1.0 / static_cast<double>(e.cols));
    p.x = std::move(x);
    p.e = std::move(e);
    p.lambda1 = lambda1;
    p.epsilon = epsilon;
    return p;
}

Matrix cost_from_plan(const Matrix& x, const Matrix& e, const Matrix& pi_f) {
    if (pi_f.rows != x.cols || pi_f.cols != e.cols)
        throw InvalidInputError("cost_from_plan: pi_f must be d1 x d2");
    const Vector r = row_sums(pi_f);
    const Vector c = col_sums(pi_f);
    Vector a(x.rows, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) a[i] += x(i, k) * x(i, k) * r[k];
    Vector b(e.rows, 0.0);
    for (std::size_t j = 0; j < e.rows; ++j)
        for (std::size_t l = 0; l < e.cols; ++l) b[j] += e(j, l) * e(j, l) * c[l];
    const Matrix g = linalg::matmul(linalg::matmul(x, pi_f), linalg::transpose(e));
    Matrix out(x.rows, e.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = 0; j < e.rows; ++j) out(i, j) = a[i] + b[j] - 2.0 * g(i, j);
    return out;
}

Matrix cost_from_plan_features(const Matrix& x, const Matrix& e, const Matrix& pi_s) {
    if (pi_s.rows != x.rows || pi_s.cols != e.rows)
        throw InvalidInputError("cost_from_plan_features: pi_s must be N x M");
    const Vector r = row_sums(pi_s);
    const Vector c = col_sums(pi_s);
    Vector a(x.cols, 0.0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t k = 0; k < x.cols; ++k) a[k] += x(i, k) * x(i, k) * r[i];
    Vector b(e.cols, 0.0);
    for (std::size_t j = 0; j < e.rows; ++j)
        for (std::size_t l = 0; l < e.cols; ++l) b[l] += e(j, l) * e(j, l) * c[j];
    const Matrix g = linalg::matmul(linalg::matmul(linalg::transpose(x), pi_s), e);
    Matrix out(x.cols, e.cols);
    for (std::size_t k = 0; k < x.cols; ++k)
        for (std::size_t l = 0; l < e.cols; ++l) out(k, l) = a[k] + b[l] - 2.0 * g(k, l);
    return out;
}

TransportPlan sinkhorn_asym(const Matrix& c, const Vector& mu, const Vector& nu, double lambda1,
                            double epsilon, double tol, int max_iter) {
    const std::size_t n = c.rows;
    const std::size_t m = c.cols;
    if (mu.size() != n || nu.size() != m) throw InvalidInputError("sinkhorn_asym: marginal dims");
    if (!linalg::all_finite(c)) throw InvalidInputError("sinkhorn_asym: non-finite cost");
    if (!(epsilon > 0.0)) throw InvalidInputError("sinkhorn_asym: epsilon must be > 0");
    if (!(lambda1 > 0.0)) throw InvalidInputError("sinkhorn_asym: lambda1 must be > 0");
    check_marginal(mu, "mu");
    check_marginal(nu, "nu");

    // Soft exponent; lambda1 = +inf selects the balanced limit -1.
    const double rho = std::isfinite(lambda1) ? lambda1 / (lambda1 + epsilon) : 1.0;

    Matrix log_k(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) log_k(i, j) = -c(i, j) / epsilon;
    Vector log_mu(n), log_nu(m);
    for (std::size_t i = 0; i < n; ++i) log_mu[i] = std::log(mu[i]);
    for (std::size_t j = 0; j < m; ++j) log_nu[j] = std::log(nu[j]);

    Vector f(n, 0.0);  // log u
    Vector g(m, 0.0);  // log v
    Vector terms(std::max(n, m));

    TransportPlan plan;
    plan.converged = false;
    int iter = 0;
    while (iter < max_iter) {
        ++iter;
        // u-update (soft row marginal)
        double delta = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            terms.resize(m);
            for (std::size_t j = 0; j < m; ++j) terms[j] = log_k(i, j) + log_nu[j] + g[j];
            const double fi = -rho * lse(terms);
            delta = std::max(delta, std::fabs(fi - f[i]));
            f[i] = fi;
        }
        // v-update (hard column marginal); always runs last so the assembled
        // plan meets the constraint exactly up to round-off.
        for (std::size_t j = 0; j < m; ++j) {
            terms.resize(n);
            for (std::size_t i = 0; i < n; ++i) terms[i] = log_k(i, j) + log_mu[i] + f[i];
            g[j] = -lse(terms);
        }
        if (delta <= tol) {
            plan.converged = true;
            break;
        }
    }

    plan.iterations = iter;
    plan.pi = Matrix(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            plan.pi(i, j) = std::exp(f[i] + g[j] + log_k(i, j) + log_mu[i] + log_nu[j]);
    plan.u = Vector(n);
    plan.v = Vector(m);
    for (std::size_t i = 0; i < n; ++i) plan.u[i] = std::exp(f[i]);
    for (std::size_t j = 0; j < m; ++j) plan.v[j] = std::exp(g[j]);
    plan.marginal_residual = max_abs_diff(col_sums(plan.pi), nu);
    return plan;
}

double objective(const Matrix& pi_s, const Matrix& pi_f, const TransportProblem& problem) {
    // Hard column constraints (indicator terms).
    if (max_abs_diff(col_sums(pi_s), problem.nu) > kHardTol) return kInf;
    if (max_abs_diff(col_sums(pi_f), problem.nu_f) > kHardTol) return kInf;
    for (double v : pi_s.data)
        if (v < 0.0) return kInf;
    for (double v : pi_f.data)
        if (v < 0.0) return kInf;

    // Coupling term via the closed-form contraction.
    const Matrix cs = cost_from_plan(problem.x, problem.e, pi_f);
    double coupling = 0.0;
    for (std::size_t i = 0; i < pi_s.size(); ++i) coupling += cs.data[i] * pi_s.data[i];

    // Soft row marginals.
    const Vector rs = row_sums(pi_s);
    const Vector rf = row_sums(pi_f);
    double soft;
    if (std::isfinite(problem.lambda1)) {
        soft = problem.lambda1 * (gen_kl(rs, problem.mu) + gen_kl(rf, problem.mu_f));
    } else {
        // Balanced limit: the KL penalty becomes a hard constraint.
        if (max_abs_diff(rs, problem.mu) > kHardTol || max_abs_diff(rf, problem.mu_f) > kHardTol)
            return kInf;
        soft = 0.0;
    }

    // Entropic terms against the product reference measures.
    double ent = 0.0;
    for (std::size_t i = 0; i < pi_s.rows; ++i) {
        for (std::size_t j = 0; j < pi_s.cols; ++j) {
            const double p = pi_s(i, j);
            const double xi = problem.mu[i] * problem.nu[j];
            ent += p > 0.0 ? p * std::log(p / xi) - p + xi : xi;
        }
    }
    for (std::size_t k = 0; k < pi_f.rows; ++k) {
        for (std::size_t l = 0; l < pi_f.cols; ++l) {
            const double p = pi_f(k, l);
            const double xi = problem.mu_f[k] * problem.nu_f[l];
            ent += p > 0.0 ? p * std::log(p / xi) - p + xi : xi;
        }
    }
    return coupling + soft + problem.epsilon * ent;
}

double dual_objective(const Vector& alpha, const Vector& beta, const Matrix& c, const Vector& mu,
                      const Vector& nu, double lambda1, double epsilon) {
    const std::size_t n = c.rows;
    const std::size_t m = c.cols;
    if (alpha.size() != n || beta.size() != m || mu.size() != n || nu.size() != m)
        throw InvalidInputError("dual_objective: dimension mismatch");

    double soft = 0.0;
    if (std::isfinite(lambda1)) {
        for (std::size_t i = 0; i < n; ++i)
            soft -= lambda1 * mu[i] * (std::exp(-alpha[i] / lambda1) - 1.0);
    } else {
        for (std::size_t i = 0; i < n; ++i) soft += mu[i] * alpha[i];  // limit of the conjugate
    }
    double linear = 0.0;
    for (std::size_t j = 0; j < m; ++j) linear += beta[j] * nu[j];

    Vector terms;
    terms.reserve(n * m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            terms.push_back((alpha[i] + beta[j] - c(i, j)) / epsilon + std::log(mu[i]) +
                            std::log(nu[j]));
    const double ent = epsilon * std::exp(lse(terms));
    return soft + linear - ent;
}

BcdResult bcd_solve(const TransportProblem& problem, double tol, int max_outer, double inner_tol,
                    int inner_max_iter) {
    problem.validate();
    BcdResult res;
    res.pi_s = outer(problem.mu, problem.nu);
    res.pi_f = outer(problem.mu_f, problem.nu_f);
    res.history.objective.push_back(objective(res.pi_s, res.pi_f, problem));

    for (int k = 0; k < max_outer; ++k) {
        const Matrix cs = cost_from_plan(problem.x, problem.e, res.pi_f);
        TransportPlan ps = sinkhorn_asym(cs, problem.mu, problem.nu, problem.lambda1,
                                         problem.epsilon, inner_tol, inner_max_iter);
        res.pi_s = std::move(ps.pi);
        res.history.sample_residual.push_back(ps.marginal_residual);

        const Matrix cf = cost_from_plan_features(problem.x, problem.e, res.pi_s);
        TransportPlan pf = sinkhorn_asym(cf, problem.mu_f, problem.nu_f, problem.lambda1,
                                         problem.epsilon, inner_tol, inner_max_iter);
        res.pi_f = std::move(pf.pi);
        res.history.feature_residual.push_back(pf.marginal_residual);

        const double j_prev = res.history.objective.back();
        const double j_new = objective(res.pi_s, res.pi_f, problem);
        res.history.objective.push_back(j_new);
        if (std::fabs(j_new - j_prev) <= tol * (1.0 + std::fabs(j_new))) {
            res.history.converged = true;
            break;
        }
    }
    return res;
}

// ---------------------------------------------------------------------------
// Text formats
// ---------------------------------------------------------------------------

namespace {

// Whitespace tokenizer that remembers byte offsets for error reporting.
class TokenReader {
public:
    explicit TokenReader(std::string text) : text_(std::move(text)) {}

    std::string_view next_token() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        if (pos_ >= text_.size()) throw ParseError("unexpected end of file", pos_);
        const std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        last_offset_ = start;
        return std::string_view(text_).substr(start, pos_ - start);
    }

    double next_double() {
        const std::string_view tok = next_token();
        if (tok == "inf" || tok == "+inf") return kInf;
        double value = 0.0;
        const auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
        if (ec != std::errc() || p != tok.data() + tok.size())
            throw ParseError("expected a number, got '" + std::string(tok) + "'", last_offset_);
        return value;
    }

    std::size_t next_count() {
        const double v = next_double();
        if (v < 0 || v != std::floor(v) || v > 1e9)
            throw ParseError("expected a nonnegative integer", last_offset_);
        return static_cast<std::size_t>(v);
    }

    void expect(const std::string& word) {
        const std::string_view tok = next_token();
        if (tok != word)
            throw ParseError("expected '" + word + "', got '" + std::string(tok) + "'", last_offset_);
    }

    bool at_end() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
        return pos_ >= text_.size();
    }

    std::size_t offset() const { return last_offset_; }

private:
    std::string text_;
    std::size_t pos_ = 0;
    std::size_t last_offset_ = 0;
};

std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    f << content;
    if (!f) throw std::runtime_error("write failed for " + path);
}

Matrix read_matrix(TokenReader& r, std::size_t rows, std::size_t cols) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j) m(i, j) = r.next_double();
    return m;
}

Vector read_vector(TokenReader& r, std::size_t n) {
    Vector v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = r.next_double();
    return v;
}

void append_number(std::string& out, double v) {
    char buf[64];
    if (std::isinf(v)) {
        out += "inf";
        return;
    }
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    out += buf;
}

void append_matrix(std::string& out, const Matrix& m) {
    for (std::size_t i = 0; i < m.rows; ++i) {
        for (std::size_t j = 0; j < m.cols; ++j) {
            if (j) out += ' ';
            append_number(out, m(i, j));
        }
        out += '\n';
    }
}

void append_vector(std::string& out, const Vector& v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (i) out += ' ';
        append_number(out, v[i]);
    }
    out += '\n';
}

}  // namespace

TransportProblem load_problem(const std::string& path) {
    TokenReader r(read_file(path));
    r.expect("ascoot-problem");
    if (r.next_count() != 1) throw ParseError("unsupported problem format version", r.offset());
    const std::size_t n = r.next_count();
    const std::size_t m = r.next_count();
    const std::size_t d1 = r.next_count();
    const std::size_t d2 = r.next_count();
    if (n == 0 || m == 0 || d1 == 0 || d2 == 0)
        throw ParseError("all dimensions must be positive", r.offset());
    TransportProblem p;
    p.x = read_matrix(r, n, d1);
    p.e = read_matrix(r, m, d2);
    p.mu = read_vector(r, n);
    p.nu = read_vector(r, m);
    p.mu_f = read_vector(r, d1);
    p.nu_f = read_vector(r, d2);
    p.lambda1 = r.next_double();
    p.epsilon = r.next_double();
    try {
        p.validate();
    } catch (const InvalidInputError& e) {
        throw ParseError(e.what(), r.offset());
    }
    return p;
}

void save_problem(const TransportProblem& problem, const std::string& path) {
    std::string out = "ascoot-problem 1\n";
    out += std::to_string(problem.x.rows) + " " + std::to_string(problem.e.rows) + " " +
           std::to_string(problem.x.cols) + " " + std::to_string(problem.e.cols) + "\n";
    append_matrix(out, problem.x);
    append_matrix(out, problem.e);
    append_vector(out, problem.mu);
    append_vector(out, problem.nu);
    append_vector(out, problem.mu_f);
    append_vector(out, problem.nu_f);
    append_number(out, problem.lambda1);
    out += ' ';
    append_number(out, problem.epsilon);
    out += '\n';
    write_file(path, out);
}

void save_plan(const Matrix& pi, const std::string& path) {
    std::string out = "ascoot-plan 1\n";
    out += std::to_string(pi.rows) + " " + std::to_string(pi.cols) + "\n";
    append_matrix(out, pi);
    write_file(path, out);
}

Matrix load_plan(const std::string& path) {
    TokenReader r(read_file(path));
    r.expect("ascoot-plan");
    if (r.next_count() != 1) throw ParseError("unsupported plan format version", r.offset());
    const std::size_t rows = r.next_count();
    const std::size_t cols = r.next_count();
    return read_matrix(r, rows, cols);
}

}  // namespace driftbench::ascoot
