#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace taxisim {

/// Base class for all library errors.
struct sim_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A field value became non-positive (or non-finite) where positivity is required.
struct positivity_error : sim_error {
    int i = -1, j = -1;
    double value = 0.0;
    positivity_error(const std::string& what, int i_, int j_, double v)
        : sim_error(what + " at cell (" + std::to_string(i_) + "," + std::to_string(j_) +
                    "), value=" + std::to_string(v)),
          i(i_), j(j_), value(v) {}
};

/// Uniform rectangular grid of nx-by-ny cells covering [0,lx] x [0,ly].
/// Scalars live at cell centers, velocities at cell faces.
struct GridSpec {
    int nx = 0, ny = 0;
    double lx = 0.0, ly = 0.0;
    double dx = 0.0, dy = 0.0;

    GridSpec() = default;
    GridSpec(int nx_, int ny_, double lx_, double ly_)
        : nx(nx_), ny(ny_), lx(lx_), ly(ly_), dx(lx_ / nx_), dy(ly_ / ny_) {
        if (nx < 4 || ny < 4) throw sim_error("grid: nx and ny must be >= 4");
        if (!(lx > 0.0) || !(ly > 0.0)) throw sim_error("grid: domain edges must be positive");
    }

    double cell_volume() const { return dx * dy; }
    double area() const { return lx * ly; }

    // cell-center and face coordinates
    double xc(int i) const { return (i + 0.5) * dx; }
    double yc(int j) const { return (j + 0.5) * dy; }
    double xf(int i) const { return i * dx; }
    double yf(int j) const { return j * dy; }

    bool same_as(const GridSpec& o) const {
        return nx == o.nx && ny == o.ny && lx == o.lx && ly == o.ly;
    }
};

/// Cell-centered scalar with a one-cell ghost halo.
/// Interior indices run i in [0,nx), j in [0,ny); ghosts sit at -1 and nx (resp. ny).
class ScalarField {
  public:
    ScalarField() = default;
    explicit ScalarField(const GridSpec& g, double init = 0.0)
        : grid_(g), v_(static_cast<std::size_t>(g.nx + 2) * (g.ny + 2), init) {}

    const GridSpec& grid() const { return grid_; }

    double& operator()(int i, int j) { return v_[idx(i, j)]; }
    double operator()(int i, int j) const { return v_[idx(i, j)]; }

    /// Raw storage including ghosts, row-major with x fastest.
    std::vector<double>& raw() { return v_; }
    const std::vector<double>& raw() const { return v_; }

    bool empty() const { return v_.empty(); }

  private:
    std::size_t idx(int i, int j) const {
        return static_cast<std::size_t>(j + 1) * (grid_.nx + 2) + (i + 1);
    }
    GridSpec grid_;
    std::vector<double> v_;
};

/// Face-centered vector data: x-components on the (nx+1) x ny vertical faces,
/// y-components on the nx x (ny+1) horizontal faces. Used for gradients,
/// fluxes and drift velocities.
class FaceField {
  public:
    FaceField() = default;
    explicit FaceField(const GridSpec& g, double init = 0.0)
        : grid_(g),
          x_(static_cast<std::size_t>(g.nx + 1) * g.ny, init),
          y_(static_cast<std::size_t>(g.nx) * (g.ny + 1), init) {}

    const GridSpec& grid() const { return grid_; }

    // x-faces: i in [0,nx], j in [0,ny)
    double& fx(int i, int j) { return x_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
    double fx(int i, int j) const { return x_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }

    // y-faces: i in [0,nx), j in [0,ny]
    double& fy(int i, int j) { return y_[static_cast<std::size_t>(j) * grid_.nx + i]; }
    double fy(int i, int j) const { return y_[static_cast<std::size_t>(j) * grid_.nx + i]; }

    std::vector<double>& xdata() { return x_; }
    std::vector<double>& ydata() { return y_; }
    const std::vector<double>& xdata() const { return x_; }
    const std::vector<double>& ydata() const { return y_; }

  private:
    GridSpec grid_;
    std::vector<double> x_, y_;
};

/// MAC staggered velocity. Same layout as FaceField; boundary faces carry the
/// no-slip condition and must stay exactly zero.
class MacVelocity {
  public:
    MacVelocity() = default;
    explicit MacVelocity(const GridSpec& g)
        : grid_(g),
          ux_(static_cast<std::size_t>(g.nx + 1) * g.ny, 0.0),
          uy_(static_cast<std::size_t>(g.nx) * (g.ny + 1), 0.0) {}

    const GridSpec& grid() const { return grid_; }

    double& u(int i, int j) { return ux_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }
    double u(int i, int j) const { return ux_[static_cast<std::size_t>(j) * (grid_.nx + 1) + i]; }

    double& v(int i, int j) { return uy_[static_cast<std::size_t>(j) * grid_.nx + i]; }
    double v(int i, int j) const { return uy_[static_cast<std::size_t>(j) * grid_.nx + i]; }

    std::vector<double>& udata() { return ux_; }
    std::vector<double>& vdata() { return uy_; }
    const std::vector<double>& udata() const { return ux_; }
    const std::vector<double>& vdata() const { return uy_; }

    /// Force boundary faces to exactly zero (no-slip on the normal component).
    void clamp_boundary() {
        for (int j = 0; j < grid_.ny; ++j) {
            u(0, j) = 0.0;
            u(grid_.nx, j) = 0.0;
        }
        for (int i = 0; i < grid_.nx; ++i) {
            v(i, 0) = 0.0;
            v(i, grid_.ny) = 0.0;
        }
    }

    double max_face_speed() const {
        double m = 0.0;
        for (double a : ux_) m = std::max(m, std::abs(a));
        for (double a : uy_) m = std::max(m, std::abs(a));
        return m;
    }

  private:
    GridSpec grid_;
    std::vector<double> ux_, uy_;
};

/// Cell-centered vector field (interpolated velocities, etc.).
struct CellVector {
    ScalarField x, y;
};

} // namespace taxisim
