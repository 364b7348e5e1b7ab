#include "hbeng/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hbeng {

namespace dop853 {

// Dormand-Prince 8(5,3) coefficients (Hairer, Norsett & Wanner, "Solving
// Ordinary Differential Equations I", dop853), including the three extra
// stages of the 7th-order dense-output interpolant.

constexpr double c2 = 0.526001519587677318785587544488e-01;
constexpr double c3 = 0.789002279381515978178381316732e-01;
constexpr double c4 = 0.118350341907227396726757197510e+00;
constexpr double c5 = 0.281649658092772603273242802490e+00;
constexpr double c6 = 0.333333333333333333333333333333e+00;
constexpr double c7 = 0.25e+00;
constexpr double c8 = 0.307692307692307692307692307692e+00;
constexpr double c9 = 0.651282051282051282051282051282e+00;
constexpr double c10 = 0.6e+00;
constexpr double c11 = 0.857142857142857142857142857142e+00;
constexpr double c14 = 0.1e+00;
constexpr double c15 = 0.2e+00;
constexpr double c16 = 0.777777777777777777777777777778e+00;

constexpr double a21 = 5.26001519587677318785587544488e-2;
constexpr double a31 = 1.97250569845378994544595329183e-2;
constexpr double a32 = 5.91751709536136983633785987549e-2;
constexpr double a41 = 2.95875854768068491816892993775e-2;
constexpr double a43 = 8.87627564304205475450678981324e-2;
constexpr double a51 = 2.41365134159266685502369798665e-1;
constexpr double a53 = -8.84549479328286085344864962717e-1;
constexpr double a54 = 9.24834003261792003115737966543e-1;
constexpr double a61 = 3.7037037037037037037037037037e-2;
constexpr double a64 = 1.70828608729473871279604482173e-1;
constexpr double a65 = 1.25467687566822425016691814123e-1;
constexpr double a71 = 3.7109375e-2;
constexpr double a74 = 1.70252211019544039314978060272e-1;
constexpr double a75 = 6.02165389804559606850219397283e-2;
constexpr double a76 = -1.7578125e-2;
constexpr double a81 = 3.70920001185047927108779319836e-2;
constexpr double a84 = 1.70383925712239993810214054705e-1;
constexpr double a85 = 1.07262030446373284651809199168e-1;
constexpr double a86 = -1.53194377486244017527936158236e-2;
constexpr double a87 = 8.27378916381402288758473766002e-3;
constexpr double a91 = 6.24110958716075717114429577812e-1;
constexpr double a94 = -3.36089262944694129406857109825e0;
constexpr double a95 = -8.68219346841726006818189891453e-1;
constexpr double a96 = 2.75920996994467083049415600797e1;
constexpr double a97 = 2.01540675504778934086186788979e1;
constexpr double a98 = -4.34898841810699588477366255144e1;
constexpr double a101 = 4.77662536438264365890433908527e-1;
constexpr double a104 = -2.48811461997166764192642586468e0;
constexpr double a105 = -5.90290826836842996371446475743e-1;
constexpr double a106 = 2.12300514481811942347288949897e1;
constexpr double a107 = 1.52792336328824235832596922938e1;
constexpr double a108 = -3.32882109689848629194453265587e1;
constexpr double a109 = -2.03312017085086261358222928593e-2;
constexpr double a111 = -9.3714243008598732571704021658e-1;
constexpr double a114 = 5.18637242884406370830023853209e0;
constexpr double a115 = 1.09143734899672957818500254654e0;
constexpr double a116 = -8.14978701074692612513997267357e0;
constexpr double a117 = -1.85200656599969598641566180701e1;
constexpr double a118 = 2.27394870993505042818970056734e1;
constexpr double a119 = 2.49360555267965238987089396762e0;
constexpr double a1110 = -3.0467644718982195003823669022e0;
constexpr double a121 = 2.27331014751653820792359768449e0;
constexpr double a124 = -1.05344954667372501984066689879e1;
constexpr double a125 = -2.00087205822486249909675718444e0;
constexpr double a126 = -1.79589318631187989172765950534e1;
constexpr double a127 = 2.79488845294199600508499808837e1;
constexpr double a128 = -2.85899827713502369474065508674e0;
constexpr double a129 = -8.87285693353062954433549289258e0;
constexpr double a1210 = 1.23605671757943030647266201528e1;
constexpr double a1211 = 6.43392746015763530355970484046e-1;

constexpr double a141 = 5.61675022830479523392909219681e-2;
constexpr double a147 = 2.53500210216624811088794765333e-1;
constexpr double a148 = -2.46239037470802489917441475441e-1;
constexpr double a149 = -1.24191423263816360469010140626e-1;
constexpr double a1410 = 1.5329179827876569731206322685e-1;
constexpr double a1411 = 8.20105229563468988491666602057e-3;
constexpr double a1412 = 7.56789766054569976138603589584e-3;
constexpr double a1413 = -8.298e-3;
constexpr double a151 = 3.18346481635021405060768473261e-2;
constexpr double a156 = 2.83009096723667755288322961402e-2;
constexpr double a157 = 5.35419883074385676223797384372e-2;
constexpr double a158 = -5.49237485713909884646569340306e-2;
constexpr double a1511 = -1.08347328697249322858509316994e-4;
constexpr double a1512 = 3.82571090835658412954920192323e-4;
constexpr double a1513 = -3.40465008687404560802977114492e-4;
constexpr double a1514 = 1.41312443674632500278074618366e-1;
constexpr double a161 = -4.28896301583791923408573538692e-1;
constexpr double a166 = -4.69762141536116384314449447206e0;
constexpr double a167 = 7.68342119606259904184240953878e0;
constexpr double a168 = 4.06898981839711007970213554331e0;
constexpr double a169 = 3.56727187455281109270669543021e-1;
constexpr double a1613 = -1.39902416515901462129418009734e-3;
constexpr double a1614 = 2.9475147891527723389556272149e0;
constexpr double a1615 = -9.15095847217987001081870187138e0;

constexpr double b1 = 5.42937341165687622380535766363e-2;
constexpr double b6 = 4.45031289275240888144113950566e0;
constexpr double b7 = 1.89151789931450038304281599044e0;
constexpr double b8 = -5.8012039600105847814672114227e0;
constexpr double b9 = 3.1116436695781989440891606237e-1;
constexpr double b10 = -1.52160949662516078556178806805e-1;
constexpr double b11 = 2.01365400804030348374776537501e-1;
constexpr double b12 = 4.47106157277725905176885569043e-2;

constexpr double bhh1 = 0.244094488188976377952755905512e+00;
constexpr double bhh2 = 0.733846688281611857341361741547e+00;
constexpr double bhh3 = 0.220588235294117647058823529412e-01;

constexpr double er1 = 0.1312004499419488073250102996e-01;
constexpr double er6 = -0.1225156446376204440720569753e+01;
constexpr double er7 = -0.4957589496572501915214079952e+00;
constexpr double er8 = 0.1664377182454986536961530415e+01;
constexpr double er9 = -0.3503288487499736816886487290e+00;
constexpr double er10 = 0.3341791187130174790297318841e+00;
constexpr double er11 = 0.8192320648511571246570742613e-01;
constexpr double er12 = -0.2235530786388629525884427845e-01;

constexpr double d41 = -0.84289382761090128651353491142e+01;
constexpr double d46 = 0.56671495351937776962531783590e+00;
constexpr double d47 = -0.30689499459498916912797304727e+01;
constexpr double d48 = 0.23846676565120698287728149680e+01;
constexpr double d49 = 0.21170345824450282767155149946e+01;
constexpr double d410 = -0.87139158377797299206789907490e+00;
constexpr double d411 = 0.22404374302607882758541771650e+01;
constexpr double d412 = 0.63157877876946881815570249290e+00;
constexpr double d413 = -0.88990336451333310820698117400e-01;
constexpr double d414 = 0.18148505520854727256656404962e+02;
constexpr double d415 = -0.91946323924783554000451984436e+01;
constexpr double d416 = -0.44360363875948939664310572000e+01;
constexpr double d51 = 0.10427508642579134603413151009e+02;
constexpr double d56 = 0.24228349177525818288430175319e+03;
constexpr double d57 = 0.16520045171727028198505394887e+03;
constexpr double d58 = -0.37454675472269020279518312152e+03;
constexpr double d59 = -0.22113666853125306036270938578e+02;
constexpr double d510 = 0.77334326684722638389603898808e+01;
constexpr double d511 = -0.30674084731089398182061213626e+02;
constexpr double d512 = -0.93321305264302278729567221706e+01;
constexpr double d513 = 0.15697238121770843886131091075e+02;
constexpr double d514 = -0.31139403219565177677282850411e+02;
constexpr double d515 = -0.93529243588444783865713862664e+01;
constexpr double d516 = 0.35816841486394083752465898540e+02;
constexpr double d61 = 0.19985053242002433820987653617e+02;
constexpr double d66 = -0.38703730874935176555105901742e+03;
constexpr double d67 = -0.18917813819516756882830838328e+03;
constexpr double d68 = 0.52780815920542364900561016686e+03;
constexpr double d69 = -0.11573902539959630126141871134e+02;
constexpr double d610 = 0.68812326946963000169666922661e+01;
constexpr double d611 = -0.10006050966910838403183860980e+01;
constexpr double d612 = 0.77771377980534432092869265740e+00;
constexpr double d613 = -0.27782057523535084065932004339e+01;
constexpr double d614 = -0.60196695231264120758267380846e+02;
constexpr double d615 = 0.84320405506677161018159903784e+02;
constexpr double d616 = 0.11992291136182789328035130030e+02;
constexpr double d71 = -0.25693933462703749003312586129e+02;
constexpr double d76 = -0.15418974869023643374053993627e+03;
constexpr double d77 = -0.23152937917604549567536039109e+03;
constexpr double d78 = 0.35763911791061412378285349910e+03;
constexpr double d79 = 0.93405324183624310003907691704e+02;
constexpr double d710 = -0.37458323136451633156875139351e+02;
constexpr double d711 = 0.10409964950896230045147246184e+03;
constexpr double d712 = 0.29840293426660503123344363579e+02;
constexpr double d713 = -0.43533456590011143754432175058e+02;
constexpr double d714 = 0.96324553959188282948394950600e+02;
constexpr double d715 = -0.39177261675615439165231486172e+02;
constexpr double d716 = -0.14972683625798562581422125276e+03;

struct Stages {
  Vector k1, k2, k3, k4, k5, k6, k7, k8, k9, k10, k11, k12;
  Vector y1;  // 8th-order result
};

/// One 12-stage core step from (t, y) with step h. k1 must hold f(t, y).
template <typename Rhs>
void core_step(const Rhs& f, Real t, const Vector& y, Real h, Stages& s) {
  s.k2.resize(y.size());
  f(t + c2 * h, y + h * (a21 * s.k1), s.k2);
  f(t + c3 * h, y + h * (a31 * s.k1 + a32 * s.k2), s.k3);
  f(t + c4 * h, y + h * (a41 * s.k1 + a43 * s.k3), s.k4);
  f(t + c5 * h, y + h * (a51 * s.k1 + a53 * s.k3 + a54 * s.k4), s.k5);
  f(t + c6 * h, y + h * (a61 * s.k1 + a64 * s.k4 + a65 * s.k5), s.k6);
  f(t + c7 * h, y + h * (a71 * s.k1 + a74 * s.k4 + a75 * s.k5 + a76 * s.k6), s.k7);
  f(t + c8 * h, y + h * (a81 * s.k1 + a84 * s.k4 + a85 * s.k5 + a86 * s.k6 + a87 * s.k7), s.k8);
  f(t + c9 * h,
    y + h * (a91 * s.k1 + a94 * s.k4 + a95 * s.k5 + a96 * s.k6 + a97 * s.k7 + a98 * s.k8), s.k9);
  f(t + c10 * h,
    y + h * (a101 * s.k1 + a104 * s.k4 + a105 * s.k5 + a106 * s.k6 + a107 * s.k7 + a108 * s.k8 +
             a109 * s.k9),
    s.k10);
  f(t + c11 * h,
    y + h * (a111 * s.k1 + a114 * s.k4 + a115 * s.k5 + a116 * s.k6 + a117 * s.k7 + a118 * s.k8 +
             a119 * s.k9 + a1110 * s.k10),
    s.k11);
  f(t + h,
    y + h * (a121 * s.k1 + a124 * s.k4 + a125 * s.k5 + a126 * s.k6 + a127 * s.k7 + a128 * s.k8 +
             a129 * s.k9 + a1210 * s.k10 + a1211 * s.k11),
    s.k12);
  s.y1 = y + h * (b1 * s.k1 + b6 * s.k6 + b7 * s.k7 + b8 * s.k8 + b9 * s.k9 + b10 * s.k10 +
                  b11 * s.k11 + b12 * s.k12);
}

}  // namespace dop853

// ---------------------------------------------------------------------------
// Trajectory
// ---------------------------------------------------------------------------

int Trajectory::find_step(Real t) const {
  if (steps_.empty()) throw Error("Trajectory: empty");
  int lo = 0, hi = static_cast<int>(steps_.size()) - 1;
  while (lo < hi) {
    const int mid = (lo + hi) / 2;
    if (t < steps_[static_cast<size_t>(mid)].t0 + steps_[static_cast<size_t>(mid)].h)
      hi = mid;
    else
      lo = mid + 1;
  }
  return lo;
}

Vector Trajectory::state(Real t) const {
  const auto& st = steps_[static_cast<size_t>(find_step(t))];
  const Real s = (t - st.t0) / st.h;
  const Real s1 = 1.0 - s;
  const auto& c = st.rcont;
  Vector out = c[7];
  out = c[6] + s * out;
  out = c[5] + s1 * out;
  out = c[4] + s * out;
  out = c[3] + s1 * out;
  out = c[2] + s * out;
  out = c[1] + s1 * out;
  return c[0] + s * out;
}

Real Trajectory::component(Real t, int i) const {
  const auto& st = steps_[static_cast<size_t>(find_step(t))];
  const Real s = (t - st.t0) / st.h;
  const Real s1 = 1.0 - s;
  const auto& c = st.rcont;
  return c[0][i] +
         s * (c[1][i] +
              s1 * (c[2][i] +
                    s * (c[3][i] +
                         s1 * (c[4][i] + s * (c[5][i] + s1 * (c[6][i] + s * c[7][i]))))));
}

// ---------------------------------------------------------------------------
// Adaptive integration
// ---------------------------------------------------------------------------

Trajectory integrate_ode(const OdeRhs& rhs, Vector y0, Real t0, Real t1,
                         const IntegratorConfig& config) {
  using namespace dop853;
  if (!y0.allFinite()) throw NonFiniteError("integrate_ode: non-finite initial state");
  if (t1 <= t0) throw InvalidArgument("integrate_ode: t1 must exceed t0");

  const int n = static_cast<int>(y0.size());
  const Real hmax = config.max_step > 0 ? config.max_step : t1 - t0;
  const Real uround = std::numeric_limits<Real>::epsilon();

  Trajectory traj;
  traj.t0_ = t0;
  traj.t1_ = t1;
  traj.dim_ = n;

  long n_rhs = 0;
  auto f = [&](Real t, const Vector& y, Vector& dy) {
    dy.resize(y.size());
    rhs(t, y, dy);
    ++n_rhs;
    if (!dy.allFinite()) throw NonFiniteError("integrate_ode: non-finite derivative");
  };

  Stages s;
  s.k1.resize(n);
  s.k3.resize(n);
  s.k4.resize(n);
  s.k5.resize(n);
  s.k6.resize(n);
  s.k7.resize(n);
  s.k8.resize(n);
  s.k9.resize(n);
  s.k10.resize(n);
  s.k11.resize(n);
  s.k12.resize(n);

  Real t = t0;
  Vector y = std::move(y0);
  f(t, y, s.k1);

  // Initial step size (Hairer's hinit).
  Real h;
  {
    Real dnf = 0.0, dny = 0.0;
    for (int i = 0; i < n; ++i) {
      const Real sk = config.abs_tol + config.rel_tol * std::abs(y[i]);
      dnf += (s.k1[i] / sk) * (s.k1[i] / sk);
      dny += (y[i] / sk) * (y[i] / sk);
    }
    h = (dnf <= 1e-10 || dny <= 1e-10) ? 1e-6 : 0.01 * std::sqrt(dny / dnf);
    h = std::min(h, hmax);
    Vector y_try = y + h * s.k1;
    Vector f1(n);
    f(t + h, y_try, f1);
    Real der2 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Real sk = config.abs_tol + config.rel_tol * std::abs(y[i]);
      der2 += ((f1[i] - s.k1[i]) / sk) * ((f1[i] - s.k1[i]) / sk);
    }
    der2 = std::sqrt(der2) / h;
    const Real der12 = std::max(der2, std::sqrt(dnf));
    const Real h1 = (der12 <= 1e-15) ? std::max(1e-6, h * 1e-3)
                                     : std::pow(0.01 / der12, 1.0 / 8.0);
    h = std::min({100 * h, h1, hmax});
  }

  constexpr Real safe = 0.9, fac1 = 0.333, fac2 = 6.0;
  long n_steps = 0, rejected = 0;
  bool last = false;

  while (t < t1) {
    if (++n_steps > config.max_steps) throw Error("integrate_ode: step limit exceeded");
    if (t + 1.01 * h >= t1) {
      h = t1 - t;
      last = true;
    }
    if (h < 16 * uround * std::max(std::abs(t), 1.0))
      throw StepSizeUnderflow("integrate_ode: step size underflow");

    core_step(f, t, y, h, s);

    // Embedded 5th/3rd-order error estimate.
    Real err5 = 0.0, err3 = 0.0;
    for (int i = 0; i < n; ++i) {
      const Real sk = config.abs_tol + config.rel_tol * std::max(std::abs(y[i]), std::abs(s.y1[i]));
      const Real e5 = er1 * s.k1[i] + er6 * s.k6[i] + er7 * s.k7[i] + er8 * s.k8[i] +
                      er9 * s.k9[i] + er10 * s.k10[i] + er11 * s.k11[i] + er12 * s.k12[i];
      const Real e3 = (b1 - bhh1) * s.k1[i] + b6 * s.k6[i] + b7 * s.k7[i] + b8 * s.k8[i] +
                      (b9 - bhh2) * s.k9[i] + b10 * s.k10[i] + b11 * s.k11[i] +
                      (b12 - bhh3) * s.k12[i];
      err5 += (e5 / sk) * (e5 / sk);
      err3 += (e3 / sk) * (e3 / sk);
    }
    Real deno = err3 + 0.01 * err5;
    if (deno <= 0.0) deno = 1.0;
    const Real err = std::abs(h) * err3 * std::sqrt(1.0 / (n * deno));

    const Real fac11 = std::pow(err, 1.0 / 8.0);
    if (err <= 1.0) {
      // Accept: build the dense-output interpolant (3 extra stages).
      Vector k13(n);
      f(t + h, s.y1, k13);

      Trajectory::Step step;
      step.t0 = t;
      step.h = h;
      step.rcont.resize(8);
      auto& rc = step.rcont;
      rc[0] = y;
      rc[1] = s.y1 - y;
      rc[2] = h * s.k1 - rc[1];
      rc[3] = rc[1] - h * k13 - rc[2];

      Vector c5v = d41 * s.k1 + d46 * s.k6 + d47 * s.k7 + d48 * s.k8 + d49 * s.k9 +
                   d410 * s.k10 + d411 * s.k11 + d412 * s.k12 + d413 * k13;
      Vector c6v = d51 * s.k1 + d56 * s.k6 + d57 * s.k7 + d58 * s.k8 + d59 * s.k9 +
                   d510 * s.k10 + d511 * s.k11 + d512 * s.k12 + d513 * k13;
      Vector c7v = d61 * s.k1 + d66 * s.k6 + d67 * s.k7 + d68 * s.k8 + d69 * s.k9 +
                   d610 * s.k10 + d611 * s.k11 + d612 * s.k12 + d613 * k13;
      Vector c8v = d71 * s.k1 + d76 * s.k6 + d77 * s.k7 + d78 * s.k8 + d79 * s.k9 +
                   d710 * s.k10 + d711 * s.k11 + d712 * s.k12 + d713 * k13;

      Vector k14(n), k15(n), k16(n);
      f(t + c14 * h,
        y + h * (a141 * s.k1 + a147 * s.k7 + a148 * s.k8 + a149 * s.k9 + a1410 * s.k10 +
                 a1411 * s.k11 + a1412 * s.k12 + a1413 * k13),
        k14);
      f(t + c15 * h,
        y + h * (a151 * s.k1 + a156 * s.k6 + a157 * s.k7 + a158 * s.k8 + a1511 * s.k11 +
                 a1512 * s.k12 + a1513 * k13 + a1514 * k14),
        k15);
      f(t + c16 * h,
        y + h * (a161 * s.k1 + a166 * s.k6 + a167 * s.k7 + a168 * s.k8 + a169 * s.k9 +
                 a1613 * k13 + a1614 * k14 + a1615 * k15),
        k16);

      rc[4] = h * (c5v + d414 * k14 + d415 * k15 + d416 * k16);
      rc[5] = h * (c6v + d514 * k14 + d515 * k15 + d516 * k16);
      rc[6] = h * (c7v + d614 * k14 + d615 * k15 + d616 * k16);
      rc[7] = h * (c8v + d714 * k14 + d715 * k15 + d716 * k16);
      traj.steps_.push_back(std::move(step));

      t += h;
      y = s.y1;
      s.k1 = k13;  // FSAL

      if (!last) {
        const Real fac = std::clamp(fac11 / safe, 1.0 / fac2, 1.0 / fac1);
        h = std::min(h / fac, hmax);
      }
    } else {
      ++rejected;
      last = false;
      h /= std::min(1.0 / fac1, fac11 / safe);
    }
  }

  traj.rejected_ = rejected;
  traj.n_rhs_ = n_rhs;
  return traj;
}

Trajectory integrate(const DriveModel& model, Real u0, Real v0, Real xi0, Real xi1,
                     const IntegratorConfig& config) {
  auto rhs = [&model](Real t, const Vector& y, Vector& dy) {
    dy[0] = y[1];
    dy[1] = model.accel(y[0], 2.0 * t);
  };
  Vector y0(2);
  y0 << u0, v0;
  return integrate_ode(rhs, std::move(y0), xi0, xi1, config);
}

Vector integrate_fixed_step(const OdeRhs& rhs, Vector y0, Real t0, Real t1, long n_steps) {
  using namespace dop853;
  const int n = static_cast<int>(y0.size());
  auto f = [&](Real t, const Vector& y, Vector& dy) {
    dy.resize(y.size());
    rhs(t, y, dy);
  };
  Stages s;
  s.k1.resize(n);
  const Real h = (t1 - t0) / static_cast<Real>(n_steps);
  Vector y = std::move(y0);
  Real t = t0;
  for (long i = 0; i < n_steps; ++i) {
    f(t, y, s.k1);
    core_step(f, t, y, h, s);
    y = s.y1;
    t = t0 + (i + 1) * h;
  }
  return y;
}

// ---------------------------------------------------------------------------
// HB coupling helpers
// ---------------------------------------------------------------------------

std::pair<Real, Real> initial_state_from_solution(const HbSolution& sol) {
  Real u0 = 0.0, v0 = 0.0;
  const auto& set = sol.coeffs.set;
  const Real st = std::sin(sol.coeffs.theta), ct = std::cos(sol.coeffs.theta);
  for (int i = 0; i < set.size(); ++i) {
    const auto& e = set.entry(i);
    u0 += sol.coeffs.amplitudes[i] * ct;
    v0 -= sol.coeffs.amplitudes[i] * (e.k * sol.omega + e.m * sol.Omega) * st;
  }
  return {u0, v0};
}

DeviationReport deviation(const std::function<Real(Real)>& u_ref,
                          const std::function<Real(Real)>& u_test, Real xi_max, int n_samples) {
  const Real ref0 = u_ref(0.0);
  if (std::abs(ref0) < 1e-300) throw ZeroReferenceError("deviation: u_ref(0) = 0");
  DeviationReport rep;
  rep.xi_max = xi_max;
  rep.samples.reserve(static_cast<size_t>(n_samples));
  for (int i = 1; i <= n_samples; ++i) {
    const Real xi = xi_max * i / n_samples;
    const Real d = std::abs((u_ref(xi) - u_test(xi)) / ref0);
    rep.samples.emplace_back(xi, d);
    rep.max_dev = std::max(rep.max_dev, d);
  }
  return rep;
}

Eigen::Matrix2d monodromy(Real q, Real a, const IntegratorConfig& config) {
  auto rhs = [q, a](Real t, const Vector& y, Vector& dy) {
    const Real g = 2.0 * q * std::cos(2.0 * t) - a;
    dy[0] = y[1];
    dy[1] = g * y[0];
    dy[2] = y[3];
    dy[3] = g * y[2];
  };
  Vector y0(4);
  y0 << 1, 0, 0, 1;
  IntegratorConfig cfg = config;
  cfg.rel_tol = std::min(cfg.rel_tol, 1e-13);
  cfg.abs_tol = std::min(cfg.abs_tol, 1e-14);
  const Trajectory traj = integrate_ode(rhs, std::move(y0), 0.0, std::numbers::pi, cfg);
  const Vector yT = traj.state(std::numbers::pi);
  Eigen::Matrix2d m;
  m << yT[0], yT[2], yT[1], yT[3];
  return m;
}

Real characteristic_exponent(Real q, Real a, const IntegratorConfig& config) {
  const Eigen::Matrix2d m = monodromy(q, a, config);
  const Real half_trace = 0.5 * m.trace();
  if (std::abs(half_trace) > 1.0)
    throw UnstableError("characteristic_exponent: (q, a) outside the stable region");
  return std::acos(half_trace) / std::numbers::pi;
}

// ---------------------------------------------------------------------------
// Period quadrature
// ---------------------------------------------------------------------------

namespace {

// Gauss-Kronrod 7-15 nodes and weights on [-1, 1].
constexpr double kGkNodes[8] = {0.991455371120812639206854697526, 0.949107912342758524526189684048,
                                0.864864423359769072789712788641, 0.741531185599394439863864773281,
                                0.586087235467691130294144838259, 0.405845151377397166906606412077,
                                0.207784955007898467600689403773, 0.0};
constexpr double kKronrodW[8] = {0.022935322010529224963732008059, 0.063092092629978553290700663189,
                                 0.104790010322250183839876322541, 0.140653259715525918745189590510,
                                 0.169004726639267902826583426599, 0.190350578064785409913256402421,
                                 0.204432940075298892414161999234, 0.209482141084727828012999174602};
constexpr double kGaussW[4] = {0.129484966168869693270611432679, 0.279705391489276667901467771424,
                               0.381830050505118944950369775489, 0.417959183673469387755102040816};

template <typename F>
std::pair<Real, Real> gk15(const F& f, Real a, Real b) {
  const Real c = 0.5 * (a + b), half = 0.5 * (b - a);
  Real kr = kKronrodW[7] * f(c);
  Real gs = kGaussW[3] * f(c);
  for (int i = 0; i < 7; ++i) {
    const Real fl = f(c - half * kGkNodes[i]);
    const Real fr = f(c + half * kGkNodes[i]);
    kr += kKronrodW[i] * (fl + fr);
    if (i % 2 == 1) gs += kGaussW[i / 2] * (fl + fr);
  }
  return {kr * half, std::abs(kr - gs) * half};
}

template <typename F>
Real adaptive_gk(const F& f, Real a, Real b, Real rel_tol) {
  struct Seg {
    Real a, b, val, err;
  };
  auto [v0, e0] = gk15(f, a, b);
  const Real tol = rel_tol * std::max(1.0, std::abs(v0));
  std::vector<Seg> segs{{a, b, v0, e0}};
  for (int round = 0; round < 60; ++round) {
    Real total_err = 0.0;
    for (const auto& s : segs) total_err += s.err;
    if (total_err <= tol) break;
    // split the worst segment
    size_t worst = 0;
    for (size_t i = 1; i < segs.size(); ++i)
      if (segs[i].err > segs[worst].err) worst = i;
    const Seg s = segs[worst];
    const Real mid = 0.5 * (s.a + s.b);
    auto [vl, el] = gk15(f, s.a, mid);
    auto [vr, er] = gk15(f, mid, s.b);
    segs[worst] = {s.a, mid, vl, el};
    segs.push_back({mid, s.b, vr, er});
  }
  Real total = 0.0;
  for (const auto& s : segs) total += s.val;
  return total;
}

}  // namespace

Real period_quadrature(const std::function<Real(Real, Real)>& divided_difference, Real A) {
  if (A <= 0.0) throw InvalidArgument("period_quadrature: amplitude must be positive");
  // T = 4 int_0^{pi/2} dphi / sqrt(g),
  // g(phi) = 2 [V(A) - V(A sin phi)] / (A^2 cos^2 phi)
  //        = 2 dd(A, A sin phi) / (A (1 + sin phi)).
  auto integrand = [&](Real phi) -> Real {
    const Real sp = std::sin(phi);
    const Real g = 2.0 * divided_difference(A, A * sp) / (A * (1.0 + sp));
    if (!(g > 0.0))
      throw NonMonotonicError("period_quadrature: potential not increasing on (0, A]");
    return 1.0 / std::sqrt(g);
  };
  const Real integral = adaptive_gk(integrand, 0.0, 0.5 * std::numbers::pi, 1e-13);
  const Real period = 4.0 * integral;
  return 2.0 * std::numbers::pi / period;
}

Real period_quadrature(const TargetPotential& potential, Real omega0, Real A) {
  // Divided difference of 1/2 w0^2 (u^2 + sum C_k u^k), computed term by term
  // as (x^j - y^j)/(x - y) = sum_i x^i y^(j-1-i); no cancellation.
  auto dd_pow = [](Real x, Real y, int j) {
    Real sum = 0.0, xi = 1.0;
    for (int i = 0; i < j; ++i) {
      sum += xi * std::pow(y, j - 1 - i);
      xi *= x;
    }
    return sum;
  };
  auto dd = [&](Real x, Real y) {
    Real s = dd_pow(x, y, 2);
    for (const auto& [k, c] : potential.c_coeffs) s += c * dd_pow(x, y, k);
    return 0.5 * omega0 * omega0 * s;
  };
  return period_quadrature(dd, A);
}

Real period_quadrature(const std::function<Real(Real)>& potential, Real A) {
  auto dd = [&](Real x, Real y) { return (potential(x) - potential(y)) / (x - y); };
  return period_quadrature(dd, A);
}

}  // namespace hbeng
