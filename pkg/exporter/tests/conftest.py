import pytest
import torch
import torchvision


@pytest.fixture(scope="session")
def checkpoint(tmp_path_factory):
    """A torchvision-format AlexNet feature checkpoint.

    No pretrained download is available in the test environment, so the
    checkpoint is synthesized with He-normal filters, whose response
    energy is close to trained filters. (torchvision's legacy default
    init produces kernels several times weaker than anything training
    yields.)
    """
    torch.manual_seed(226)
    model = torchvision.models.alexnet(weights=None)
    for m in model.features:
        if isinstance(m, torch.nn.Conv2d):
            torch.nn.init.kaiming_normal_(m.weight, nonlinearity="relu")
            torch.nn.init.normal_(m.bias, 0.0, 0.1)
    state = {k: v for k, v in model.state_dict().items() if k.startswith("features.")}
    path = tmp_path_factory.mktemp("ckpt") / "alexnet_features.pth"
    torch.save(state, path)
    return path
