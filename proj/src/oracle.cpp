#include "iscat/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "iscat/special.hpp"

namespace iscat::oracle {

namespace {
static const std::vector<BesselRef> kTable = {
    {0, 0, 0.001, 0.99999975000001562},
    {0, 1, 0.001, -4.4714166113759233},
    {0, 0, 0.01, 0.99997500015624957},
    {0, 1, 0.01, -3.0054556370836459},
    {0, 0, 0.087499999999999994, 0.99808685321404714},
    {0, 1, 0.087499999999999994, -1.6203583026230464},
    {0, 0, 0.14999999999999999, 0.99438290521414002},
    {0, 1, 0.14999999999999999, -1.2707763709278356},
    {0, 0, 0.29999999999999999, 0.97762624653829609},
    {0, 1, 0.29999999999999999, -0.80727357780451949},
    {0, 0, 0.5, 0.9384698072408129},
    {0, 1, 0.5, -0.44451873350670656},
    {0, 0, 1.0, 0.76519768655796655},
    {0, 1, 1.0, 0.088256964215676958},
    {0, 0, 2.0, 0.22389077914123567},
    {0, 1, 2.0, 0.51037567264974512},
    {0, 0, 2.4048255576957729, -6.1087652597367304e-17},
    {0, 1, 2.4048255576957729, 0.50992438344847907},
    {0, 0, 3.0, -0.26005195490193344},
    {0, 1, 3.0, 0.37685001001279038},
    {0, 0, 5.0, -0.1775967713143383},
    {0, 1, 5.0, -0.30851762524903378},
    {0, 0, 7.5, 0.2663396578803784},
    {0, 1, 7.5, 0.11731328614820863},
    {0, 0, 10.0, -0.24593576445134834},
    {0, 1, 10.0, 0.055671167283599391},
    {0, 0, 14.930917708487787, -1.460389551237033e-16},
    {0, 1, 14.930917708487787, 0.20643147785241907},
    {0, 0, 20.0, 0.16702466434058315},
    {0, 1, 20.0, 0.062640596809383831},
    {0, 0, 26.5, 0.12987762611338541},
    {0, 1, 26.5, 0.084563135740292735},
    {0, 0, 33.0, 0.097270672235509463},
    {0, 1, 33.0, 0.09913482552087946},
    {0, 0, 41.5, -0.12282032421380177},
    {0, 1, 41.5, 0.015946508714008031},
    {0, 0, 50.0, 0.055812327669251815},
    {0, 1, 50.0, -0.098064995470077079},
    {1, 0, 0.001, 0.00049999993750000261},
    {1, 1, 0.001, -636.62216723113941},
    {1, 0, 0.01, 0.0049999375002604162},
    {1, 1, 0.01, -63.678596282060655},
    {1, 0, 0.087499999999999994, 0.043708143237685719},
    {1, 1, 0.087499999999999994, -7.3605592243540974},
    {1, 0, 0.14999999999999999, 0.07478926016123517},
    {1, 1, 0.14999999999999999, -4.363683464028888},
    {1, 0, 0.29999999999999999, 0.148318816273104},
    {1, 1, 0.29999999999999999, -2.2931051383885291},
    {1, 0, 0.5, 0.24226845767487389},
    {1, 1, 0.5, -1.4714723926702431},
    {1, 0, 1.0, 0.44005058574493352},
    {1, 1, 1.0, -0.78121282130028872},
    {1, 0, 2.0, 0.57672480775687339},
    {1, 1, 2.0, -0.10703243154093755},
    {1, 0, 2.4048255576957729, 0.51914749728946676},
    {1, 1, 2.4048255576957729, 0.1027466824382596},
    {1, 0, 3.0, 0.33905895852593646},
    {1, 1, 3.0, 0.32467442479179998},
    {1, 0, 5.0, -0.32757913759146522},
    {1, 1, 5.0, 0.14786314339122684},
    {1, 0, 7.5, 0.13524842757970551},
    {1, 1, 7.5, -0.25912851048611625},
    {1, 0, 10.0, 0.043472746168861437},
    {1, 1, 10.0, 0.24901542420695388},
    {1, 0, 14.930917708487787, 0.20654643307799602},
    {1, 1, 14.930917708487787, 0.0069052434735740836},
    {1, 0, 20.0, 0.066833124175850046},
    {1, 1, 20.0, -0.1655116143625213},
    {1, 0, 26.5, 0.087027807537331489},
    {1, 1, 26.5, -0.12830572773177323},
    {1, 0, 33.0, 0.1006196491151175},
    {1, 1, 33.0, -0.095780122419701794},
    {1, 0, 41.5, 0.014468116511452121},
    {1, 1, 41.5, 0.12302132916055137},
    {1, 0, 50.0, -0.097511828125175138},
    {1, 1, 50.0, -0.056795668562014768},
    {2, 0, 0.001, 1.2499998958333366e-7},
    {2, 1, 0.001, -1273239.8630456674},
    {2, 0, 0.01, 1.2499895833658854e-5},
    {2, 1, 0.01, -12732.713800775047},
    {2, 0, 0.087499999999999994, 0.00095642079019793445},
    {2, 1, 0.087499999999999994, -166.62099539689919},
    {2, 0, 0.14999999999999999, 0.0028072302689956107},
    {2, 1, 0.14999999999999999, -56.911669816124007},
    {2, 0, 0.29999999999999999, 0.011165861949063963},
    {2, 1, 0.29999999999999999, -14.480094011452342},
    {2, 0, 0.5, 0.030604023458682641},
    {2, 1, 0.5, -5.4413708371742657},
    {2, 0, 1.0, 0.11490348493190048},
    {2, 1, 1.0, -1.6506826068162544},
    {2, 0, 2.0, 0.35283402861563772},
    {2, 1, 2.0, -0.61740810419068267},
    {2, 0, 2.4048255576957729, 0.43175480701968038},
    {2, 1, 2.4048255576957729, -0.42447395889734598},
    {2, 0, 3.0, 0.48609126058589108},
    {2, 1, 3.0, -0.16040039348492373},
    {2, 0, 5.0, 0.046565116277752216},
    {2, 1, 5.0, 0.36766288260552452},
    {2, 0, 7.5, -0.23027341052579026},
    {2, 1, 7.5, -0.18641422227783963},
    {2, 0, 10.0, 0.25463031368512062},
    {2, 1, 10.0, -0.0058680824422086146},
    {2, 0, 14.930917708487787, 0.027666944137074916},
    {2, 1, 14.930917708487787, -0.20550651883671856},
    {2, 0, 20.0, -0.16034135192299815},
    {2, 1, 20.0, -0.079191758245635961},
    {2, 0, 26.5, -0.1233094896954736},
    {2, 1, 26.5, -0.094246586889860526},
    {2, 0, 33.0, -0.091172511683078099},
    {2, 1, 33.0, -0.10493968142510381},
    {2, 0, 41.5, 0.1235175828408597},
    {2, 1, 41.5, -0.010017769959282664},
    {2, 0, 50.0, -0.059712800794258821},
    {2, 1, 50.0, 0.095793168727596488},
    {5, 0, 0.001, 2.6041665581597244e-19},
    {5, 1, 0.001, -2.4446200786802638e+17},
    {5, 0, 0.01, 2.6041558159915987e-14},
    {5, 1, 0.01, -2444635204829.7112},
    {5, 0, 0.087499999999999994, 1.3352743089120367e-9},
    {5, 1, 0.087499999999999994, -47684684.717169311},
    {5, 0, 0.14999999999999999, 1.9756858643421108e-8},
    {5, 1, 0.14999999999999999, -3223783.8993588563},
    {5, 0, 0.29999999999999999, 6.3044326337710711e-7},
    {5, 1, 0.29999999999999999, -101169.65735231197},
    {5, 0, 0.5, 8.0536272413574741e-6},
    {5, 1, 0.5, -7946.3014788074733},
    {5, 0, 1.0, 0.00024975773021123443},
    {5, 1, 1.0, -260.40586662581222},
    {5, 0, 2.0, 0.0070396297558716855},
    {5, 1, 2.0, -9.935989128481975},
    {5, 0, 2.4048255576957729, 0.016389243204805852},
    {5, 1, 2.4048255576957729, -4.4919848883206289},
    {5, 0, 3.0, 0.043028434877047584},
    {5, 1, 3.0, -1.9059459538286737},
    {5, 0, 5.0, 0.26114054612017009},
    {5, 1, 5.0, -0.45369482249110188},
    {5, 0, 7.5, 0.28347390516255046},
    {5, 1, 7.5, 0.17541805694546512},
    {5, 0, 10.0, -0.23406152818679364},
    {5, 1, 10.0, 0.1354030476893623},
    {5, 0, 14.930917708487787, 0.14143443476086855},
    {5, 1, 14.930917708487787, 0.15873028036445505},
    {5, 0, 20.0, 0.15116976798239497},
    {5, 1, 20.0, -0.10003576788953243},
    {5, 0, 26.5, 0.13564535230004108},
    {5, 1, 26.5, -0.077830474806858463},
    {5, 0, 33.0, 0.12885115803998511},
    {5, 1, 33.0, -0.053959184335208255},
    {5, 0, 41.5, -0.02131923782514406},
    {5, 1, 41.5, 0.12246245464578967},
    {5, 0, 50.0, -0.08140024769656964},
    {5, 1, 50.0, -0.078548413913081653},
    {9, 0, 0.001, 5.382288776377524e-36},
    {9, 1, 0.001, -6.5711385661444614e+33},
    {9, 0, 0.01, 5.3822754552277585e-27},
    {9, 1, 0.01, -6.5711588956404308e+24},
    {9, 0, 0.087499999999999994, 1.6179174382412376e-18},
    {9, 1, 0.087499999999999994, -21861101700606342.0},
    {9, 0, 0.14999999999999999, 2.0679690790435955e-16},
    {9, 1, 0.14999999999999999, -171050622430674.65},
    {9, 0, 0.29999999999999999, 1.0570147217965366e-13},
    {9, 1, 0.29999999999999999, -334788875005.72614},
    {9, 0, 0.5, 1.044676758932898e-11},
    {9, 1, 0.5, -3390825144.6412642},
    {9, 0, 1.0, 5.249250179911875e-9},
    {9, 1, 1.0, -6780204.9387319831},
    {9, 0, 2.0, 2.4923434351330642e-6},
    {9, 1, 2.0, -14559.829375911018},
    {9, 0, 2.4048255576957729, 1.2517270977961512e-5},
    {9, 1, 2.4048255576957729, -2933.8164082666547},
    {9, 0, 3.0, 8.4395021309091779e-5},
    {9, 1, 3.0, -444.95950406425542},
    {9, 0, 5.0, 0.0055202831394756875},
    {9, 1, 5.0, -7.7638831883765811},
    {9, 0, 7.5, 0.08891922849385146},
    {9, 1, 7.5, -0.73495731115666015},
    {9, 0, 10.0, 0.29185568526512005},
    {9, 1, 10.0, -0.19929926580524434},
    {9, 0, 14.930917708487787, -0.21680669941787347},
    {9, 1, 14.930917708487787, 0.078571505930742869},
    {9, 0, 20.0, 0.12512625464799416},
    {9, 1, 20.0, 0.14123902687730904},
    {9, 0, 26.5, 0.13634774073504927},
    {9, 1, 26.5, 0.083314474610366787},
    {9, 0, 33.0, 0.12696832177128316},
    {9, 1, 33.0, 0.062665231021606646},
    {9, 0, 41.5, -0.094201490490745388},
    {9, 1, 41.5, 0.082696634994688471},
    {9, 0, 50.0, -0.027192461043972542},
    {9, 1, 50.0, -0.11046979534674458},
};
}  // namespace

const std::vector<BesselRef>& bessel_reference_table() { return kTable; }

Complex quad_cell_self_term(double k0, double cell_w, double cell_h, int angular_points) {
    // Radial part in closed form: int_0^R H0(k r) r dr = [R H1(kR) + 2i/pi] / k
    // leaving a smooth 1D integral over the angle, R(t) set by the rectangle edge.
    const Complex i_unit{0.0, 1.0};
    const double hw = 0.5 * cell_w, hh = 0.5 * cell_h;
    auto radius = [&](double t) {
        const double c = std::abs(std::cos(t)), s = std::abs(std::sin(t));
        return std::min(c > 0 ? hw / c : 1e300, s > 0 ? hh / s : 1e300);
    };
    Complex acc{0.0, 0.0};
    const double two_pi = 6.283185307179586476925286766559;
    const double dt = two_pi / angular_points;
    for (int k = 0; k < angular_points; ++k) {
        const double t = (k + 0.5) * dt;
        const double kr = k0 * radius(t);
        const Complex radial = (kr * hankel1(1, kr) + 2.0 * i_unit / M_PI) / (k0 * k0);
        acc += radial;
    }
    acc *= dt;
    return i_unit * 0.25 * k0 * k0 * acc;
}

bool point_in_polygon_raycast(const std::vector<std::array<double, 2>>& poly, double x, double y) {
    bool inside = false;
    const std::size_t n = poly.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const double xi = poly[i][0], yi = poly[i][1];
        const double xj = poly[j][0], yj = poly[j][1];
        const bool crosses = (yi > y) != (yj > y);
        if (crosses && x < (xj - xi) * (y - yi) / (yj - yi) + xi) inside = !inside;
    }
    return inside;
}

double ssim_reference(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int width, int height,
                      double dynamic_range) {
    constexpr int win = 11;
    constexpr double sigma = 1.5;
    if (width < win || height < win)
        throw std::invalid_argument("ssim_reference: image smaller than window");
    double taps[win];
    double tap_sum = 0.0;
    for (int i = 0; i < win; ++i) {
        const double d = i - (win - 1) / 2.0;
        taps[i] = std::exp(-d * d / (2.0 * sigma * sigma));
        tap_sum += taps[i];
    }
    for (double& t : taps) t /= tap_sum;

    const double c1 = 0.01 * dynamic_range * 0.01 * dynamic_range;
    const double c2 = 0.03 * dynamic_range * 0.03 * dynamic_range;
    auto px = [&](const Eigen::VectorXd& img, int r, int c) -> double {
        return img[c + static_cast<Eigen::Index>(width) * r];
    };

    double acc = 0.0;
    int count = 0;
    for (int r0 = 0; r0 + win <= height; ++r0)
        for (int c0 = 0; c0 + win <= width; ++c0) {
            double mu_a = 0, mu_b = 0;
            for (int r = 0; r < win; ++r)
                for (int c = 0; c < win; ++c) {
                    const double wgt = taps[r] * taps[c];
                    mu_a += wgt * px(a, r0 + r, c0 + c);
                    mu_b += wgt * px(b, r0 + r, c0 + c);
                }
            double saa = 0, sbb = 0, sab = 0;
            for (int r = 0; r < win; ++r)
                for (int c = 0; c < win; ++c) {
                    const double wgt = taps[r] * taps[c];
                    const double da = px(a, r0 + r, c0 + c) - mu_a;
                    const double db = px(b, r0 + r, c0 + c) - mu_b;
                    saa += wgt * da * da;
                    sbb += wgt * db * db;
                    sab += wgt * da * db;
                }
            const double num = (2 * mu_a * mu_b + c1) * (2 * sab + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (saa + sbb + c2);
            acc += num / den;
            ++count;
        }
    return acc / count;
}

Eigen::VectorXcd lasso_coordinate_descent(const Eigen::MatrixXcd& g, const Eigen::VectorXcd& y,
                                          double l1_weight, int max_sweeps, double tol) {
    const Eigen::Index n = g.cols();
    Eigen::VectorXcd x = Eigen::VectorXcd::Zero(n);
    Eigen::VectorXcd r = y;  // residual y - G x
    std::vector<double> col_norm2(n);
    for (Eigen::Index j = 0; j < n; ++j) col_norm2[j] = g.col(j).squaredNorm();

    auto objective = [&]() { return 0.5 * r.squaredNorm() + l1_weight * x.cwiseAbs().sum(); };
    double prev = objective();
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        for (Eigen::Index j = 0; j < n; ++j) {
            if (col_norm2[j] == 0.0) continue;
            const Complex rho = g.col(j).dot(r) + col_norm2[j] * x[j];  // g_j^H (y - G x_{-j})
            const double mag = std::abs(rho);
            Complex xj{0.0, 0.0};
            if (mag > l1_weight) xj = rho * ((mag - l1_weight) / mag) / col_norm2[j];
            if (xj != x[j]) {
                r += g.col(j) * (x[j] - xj);
                x[j] = xj;
            }
        }
        const double f = objective();
        if (std::abs(prev - f) <= tol * std::max(1.0, std::abs(prev))) break;
        prev = f;
    }
    return x;
}

Eigen::VectorXd finite_difference_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                           const Eigen::VectorXd& x0, double h) {
    Eigen::VectorXd g(x0.size());
    Eigen::VectorXd x = x0;
    for (Eigen::Index i = 0; i < x0.size(); ++i) {
        const double step = h * std::max(1.0, std::abs(x0[i]));
        x[i] = x0[i] + step;
        const double fp = f(x);
        x[i] = x0[i] - step;
        const double fm = f(x);
        x[i] = x0[i];
        g[i] = (fp - fm) / (2.0 * step);
    }
    return g;
}

void two_pass_stats(const std::vector<double>& values, double& mean, double& median,
                    double& stddev) {
    const double n = static_cast<double>(values.size());
    double s = 0.0;
    for (double v : values) s += v;
    mean = s / n;
    double acc = 0.0;
    for (double v : values) acc += (v - mean) * (v - mean);
    stddev = values.size() > 1 ? std::sqrt(acc / (n - 1.0)) : 0.0;
    std::vector<double> sorted = values;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size() / 2;
    median = sorted.size() % 2 == 1 ? sorted[m] : 0.5 * (sorted[m - 1] + sorted[m]);
}

}  // namespace iscat::oracle
